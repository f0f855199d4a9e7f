use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::metrics::reconstruction_r2;
use super::svd::{skinny_svd, SkinnySvd};
use crate::error::{Error, Result};

/// `Q = V Vᵀ`, the self-representation matrix with `Z Q = Z`.
pub fn self_expression_exact(z: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = skinny_svd(z);
    &svd.v * svd.v.transpose()
}

/// Singular-value weight of the relaxed low-rank problem:
/// `1 − 1/(τ x²)` above `1/√τ`, zero at or below it.
pub fn shrinkage(x: f64, tau: f64) -> f64 {
    if x > 1.0 / tau.sqrt() {
        1.0 - 1.0 / (tau * x * x)
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelfExpressionResult {
    #[serde(skip)]
    pub q: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    pub weights: Vec<f64>,
    pub tau: f64,
    pub r_squared: f64,
}

fn weighted_gram(svd: &SkinnySvd, weights: &[f64]) -> DMatrix<f64> {
    let mut scaled = svd.v.clone();
    for (j, w) in weights.iter().enumerate() {
        scaled.column_mut(j).scale_mut(*w);
    }
    scaled * svd.v.transpose()
}

/// Closed-form minimizer `Q* = V P(Λ) Vᵀ` of the relaxed self-expression
/// problem, together with its reconstruction R².
pub fn self_expression_relaxed(z: &DMatrix<f64>, tau: f64) -> Result<SelfExpressionResult> {
    let svd = skinny_svd(z);
    self_expression_from_svd(z, &svd, tau)
}

pub(crate) fn self_expression_from_svd(
    z: &DMatrix<f64>,
    svd: &SkinnySvd,
    tau: f64,
) -> Result<SelfExpressionResult> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidArgument(format!("tau must be positive and finite, got {tau}")));
    }
    let weights: Vec<f64> = svd.singular_values.iter().map(|s| shrinkage(*s, tau)).collect();
    let q = weighted_gram(svd, &weights);
    let r_squared = reconstruction_r2(z, &q)?;
    Ok(SelfExpressionResult {
        q,
        singular_values: svd.singular_values.clone(),
        weights,
        tau,
        r_squared,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::seeded_rng;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn gaussian(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = seeded_rng(seed, 0);
        DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
    }

    #[test]
    fn full_row_rank_square_gives_identity() {
        let z = gaussian(5, 5, 3);
        let q = self_expression_exact(&z);
        assert!((q - DMatrix::identity(5, 5)).norm() < 1e-9);
    }

    #[test]
    fn exact_q_is_symmetric_idempotent_and_self_representing() {
        let z = gaussian(7, 3, 1) * gaussian(3, 20, 2);
        let q = self_expression_exact(&z);
        assert!((&q - q.transpose()).norm() < 1e-12);
        assert!((&q * &q - &q).norm() < 1e-9);
        assert!((&z * &q - &z).norm() <= 1e-9 * z.norm());
    }

    #[test]
    fn two_lines_separate() {
        // Three points on each of two independent lines through the origin in R³.
        let l1 = [1.0, 2.0, -1.0];
        let l2 = [0.5, -1.0, 3.0];
        let coeffs = [1.0, -2.0, 0.7];
        let mut z = DMatrix::zeros(3, 6);
        for (j, c) in coeffs.iter().enumerate() {
            for i in 0..3 {
                z[(i, j)] = c * l1[i];
                z[(i, j + 3)] = (c + 0.4) * l2[i];
            }
        }
        let q = self_expression_exact(&z);
        for a in 0..3 {
            for b in 3..6 {
                assert!(q[(a, b)].abs() < 1e-8, "Q[{a},{b}] = {}", q[(a, b)]);
            }
        }
    }

    #[test]
    fn single_column_gives_one() {
        let z = DMatrix::from_column_slice(3, 1, &[1.0, -2.0, 0.5]);
        let q = self_expression_exact(&z);
        assert_eq!(q.shape(), (1, 1));
        assert!((q[(0, 0)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn shrinkage_formula() {
        assert_eq!(shrinkage(1.0 / 2.0, 4.0), 0.0);
        assert!((shrinkage(2.0, 1.0) - 0.75).abs() < 1e-15);
        assert_eq!(shrinkage(0.1, 1.0), 0.0);
    }

    #[test]
    fn relaxed_weights_lie_in_unit_interval_and_q_is_symmetric() {
        let z = gaussian(10, 4, 5) * gaussian(4, 30, 6) + gaussian(10, 30, 7) * 0.01;
        let res = self_expression_relaxed(&z, 0.5).unwrap();
        assert!(res.weights.iter().all(|w| (0.0..1.0).contains(w)));
        assert!((&res.q - res.q.transpose()).norm() < 1e-10);
    }

    #[test]
    fn large_tau_recovers_projector() {
        let z = gaussian(8, 3, 8) * gaussian(3, 25, 9);
        let exact = self_expression_exact(&z);
        let relaxed = self_expression_relaxed(&z, 1e8).unwrap();
        assert!((relaxed.q - exact).norm() < 1e-6);
    }

    #[test]
    fn nonpositive_tau_rejected() {
        let z = gaussian(3, 3, 1);
        assert!(self_expression_relaxed(&z, 0.0).is_err());
        assert!(self_expression_relaxed(&z, -1.0).is_err());
    }
}
