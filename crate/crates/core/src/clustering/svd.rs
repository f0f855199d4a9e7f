use nalgebra::DMatrix;

/// Rank-truncated SVD `Z = U Λ Vᵀ` keeping only numerically nonzero
/// singular values, sorted in descending order.
#[derive(Debug, Clone)]
pub struct SkinnySvd {
    /// `q × r`, orthonormal columns.
    pub u: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    /// `n × r`, orthonormal columns.
    pub v: DMatrix<f64>,
}

impl SkinnySvd {
    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        let mut scaled = self.u.clone();
        for (j, s) in self.singular_values.iter().enumerate() {
            scaled.column_mut(j).scale_mut(*s);
        }
        scaled * self.v.transpose()
    }
}

/// Relative tolerance factor for the numerical rank.
pub const RANK_EPS: f64 = 1e-12;

/// Skinny SVD with numerical rank threshold `σ_max · max(q, n) · 1e-12`.
pub fn skinny_svd(z: &DMatrix<f64>) -> SkinnySvd {
    let (rows, cols) = z.shape();
    let empty = || SkinnySvd {
        u: DMatrix::zeros(rows, 0),
        singular_values: Vec::new(),
        v: DMatrix::zeros(cols, 0),
    };
    if rows == 0 || cols == 0 {
        return empty();
    }
    let svd = z.clone().svd(true, true);
    let u_full = svd.u.expect("requested U");
    let vt_full = svd.v_t.expect("requested Vᵀ");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|a, b| svd.singular_values[*b].total_cmp(&svd.singular_values[*a]));

    let sigma_max = order.first().map_or(0.0, |i| svd.singular_values[*i]);
    if sigma_max <= 0.0 || !sigma_max.is_finite() {
        return empty();
    }
    let threshold = sigma_max * rows.max(cols) as f64 * RANK_EPS;
    let kept: Vec<usize> = order
        .into_iter()
        .filter(|i| svd.singular_values[*i] > threshold)
        .collect();

    let r = kept.len();
    let mut u = DMatrix::zeros(rows, r);
    let mut v = DMatrix::zeros(cols, r);
    let mut singular_values = Vec::with_capacity(r);
    for (dst, src) in kept.iter().enumerate() {
        u.set_column(dst, &u_full.column(*src));
        v.set_column(dst, &vt_full.row(*src).transpose());
        singular_values.push(svd.singular_values[*src]);
    }
    SkinnySvd { u, singular_values, v }
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
    fn identity_has_unit_singular_values() {
        let s = skinny_svd(&DMatrix::identity(3, 3));
        assert_eq!(s.rank(), 3);
        for v in &s.singular_values {
            assert!((v - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn rotated_diagonal_keeps_its_values() {
        let (c, s) = (0.6f64, 0.8f64);
        let rot = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
        let z = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, 2.0])) * rot;
        let svd = skinny_svd(&z);
        assert!((svd.singular_values[0] - 3.0).abs() < 1e-12);
        assert!((svd.singular_values[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn product_of_thin_factors_has_their_rank() {
        let z = gaussian(40, 6, 1) * gaussian(6, 200, 2);
        let svd = skinny_svd(&z);
        assert_eq!(svd.rank(), 6);
        let err = (&z - svd.reconstruct()).norm();
        assert!(err <= 1e-9 * z.norm(), "{err}");
        let utu = svd.u.transpose() * &svd.u;
        let vtv = svd.v.transpose() * &svd.v;
        assert!((utu - DMatrix::identity(6, 6)).norm() < 1e-10);
        assert!((vtv - DMatrix::identity(6, 6)).norm() < 1e-10);
        assert!(svd.singular_values.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn zero_matrix_has_rank_zero() {
        let svd = skinny_svd(&DMatrix::zeros(4, 7));
        assert_eq!(svd.rank(), 0);
        assert_eq!(svd.v.shape(), (7, 0));
        assert_eq!(svd.u.shape(), (4, 0));
    }
}
