//! Seeded Gaussian random projections.
//!
//! A projection matrix has i.i.d. `N(0, 1/q)` entries, so for any fixed
//! `a`, `b` the projected inner product `Pa · Pb` is an unbiased estimate of
//! `a · b` with variance at most `(3‖a‖²‖b‖² − (a·b)²) / q`.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{dot, mean_and_variance, seeded_rng};

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionMatrix {
    q: usize,
    k: usize,
    seed: u64,
    /// Row-major `q × k`.
    entries: Vec<f64>,
}

impl ProjectionMatrix {
    /// Wraps explicit entries (row-major `q × k`); `seed` is informational.
    pub fn from_entries(q: usize, k: usize, entries: Vec<f64>, seed: u64) -> Result<Self> {
        if q == 0 || k == 0 {
            return Err(Error::InvalidArgument("projection dimensions must be positive".into()));
        }
        if entries.len() != q * k {
            return Err(Error::DimensionMismatch {
                context: "projection entries",
                expected: q * k,
                actual: entries.len(),
            });
        }
        Ok(Self { q, k, seed, entries })
    }

    pub fn latent_dim(&self) -> usize {
        self.q
    }

    pub fn source_dim(&self) -> usize {
        self.k
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn project(&self, v: &[f64]) -> Result<Vec<f64>> {
        project(self, v)
    }
}

/// Draws a `q × k` matrix with i.i.d. `N(0, 1/q)` entries from `seed`.
pub fn sample_projection(k: usize, q: usize, seed: u64) -> Result<ProjectionMatrix> {
    if k == 0 || q == 0 {
        return Err(Error::InvalidArgument(format!(
            "projection needs k >= 1 and q >= 1, got k={k}, q={q}"
        )));
    }
    let scale = 1.0 / (q as f64).sqrt();
    let mut rng = seeded_rng(seed, 0);
    let entries = (0..q * k)
        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
        .collect();
    Ok(ProjectionMatrix { q, k, seed, entries })
}

/// `z = P v`.
pub fn project(p: &ProjectionMatrix, v: &[f64]) -> Result<Vec<f64>> {
    if v.len() != p.k {
        return Err(Error::DimensionMismatch {
            context: "projection input",
            expected: p.k,
            actual: v.len(),
        });
    }
    Ok(p.entries.chunks_exact(p.k).map(|row| dot(row, v)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InnerProductStats {
    pub empirical_mean: f64,
    pub empirical_var: f64,
    pub analytic_mean: f64,
    pub var_bound: f64,
    pub trials: usize,
}

/// Upper bound on `Var[Pa · Pb]` for a `q`-row Gaussian projection.
pub fn variance_bound(a: &[f64], b: &[f64], q: usize) -> f64 {
    let ab = dot(a, b);
    (3.0 * dot(a, a) * dot(b, b) - ab * ab) / q as f64
}

/// Monte-Carlo estimate of the mean and variance of `Pa · Pb` over
/// independently drawn projections.
///
/// Each trial draws its own matrix from a seed derived from `(seed, trial)`,
/// so the result does not depend on how trials are scheduled. Columns of `P`
/// outside the joint support of `a` and `b` never touch `Pa · Pb`, so only
/// the supported columns are drawn.
pub fn inner_product_statistics(
    a: &[f64],
    b: &[f64],
    q: usize,
    trials: usize,
    seed: u64,
) -> Result<InnerProductStats> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            context: "inner product operands",
            expected: a.len(),
            actual: b.len(),
        });
    }
    if q == 0 {
        return Err(Error::InvalidArgument("q must be at least 1".into()));
    }
    if trials < 100 {
        return Err(Error::InvalidArgument(format!("need at least 100 trials, got {trials}")));
    }
    let support: Vec<(f64, f64)> = a
        .iter()
        .zip(b)
        .filter(|(x, y)| **x != 0.0 || **y != 0.0)
        .map(|(x, y)| (*x, *y))
        .collect();
    let scale = 1.0 / (q as f64).sqrt();

    let values: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = seeded_rng(seed, trial as u64 + 1);
            let mut acc = 0.0;
            for _ in 0..q {
                let (mut pa, mut pb) = (0.0, 0.0);
                for (x, y) in &support {
                    let w = scale * rng.sample::<f64, _>(StandardNormal);
                    pa += w * x;
                    pb += w * y;
                }
                acc += pa * pb;
            }
            acc
        })
        .collect();

    let (mean, var) = mean_and_variance(&values);
    Ok(InnerProductStats {
        empirical_mean: mean,
        empirical_var: var,
        analytic_mean: dot(a, b),
        var_bound: variance_bound(a, b, q),
        trials,
    })
}
