//! Low-rank self-expression and subspace clustering of latent codes.
//!
//! Data matrices are `q × n` with one sample per column.

mod metrics;
mod self_expression;
mod spectral;
mod svd;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use metrics::{clustering_accuracy, confusion_matrix, reconstruction_r2, MAX_MATCHED_CLUSTERS};
pub use self_expression::{self_expression_exact, self_expression_relaxed, shrinkage, SelfExpressionResult};
pub use spectral::{affinity, canonical_labels, kmeans, normalized_laplacian, spectral_cluster, KMeansResult, KMEANS_RESTARTS};
pub use svd::{skinny_svd, SkinnySvd, RANK_EPS};

/// Lower and upper edge of the accepted R² band for automatic τ.
pub const R2_BAND: (f64, f64) = (0.85, 0.95);
const GRID_POINTS_PER_DECADE: usize = 10;
const BISECTION_STEPS: usize = 60;

/// Appends a row of ones (homogeneous coordinates).
pub fn affine_lift(z: &DMatrix<f64>) -> DMatrix<f64> {
    z.clone().insert_row(z.nrows(), 1.0)
}

/// Builds a `q × n` matrix from `n` row vectors of length `q`.
pub fn columns_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let q = rows.first().map_or(0, Vec::len);
    if let Some(bad) = rows.iter().find(|r| r.len() != q) {
        return Err(Error::DimensionMismatch {
            context: "latent rows",
            expected: q,
            actual: bad.len(),
        });
    }
    Ok(DMatrix::from_fn(q, rows.len(), |i, j| rows[j][i]))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TauSelection {
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterOptions {
    pub k: usize,
    pub affine: bool,
    pub tau: TauSelection,
    pub seed: u64,
}

impl ClusterOptions {
    pub fn auto(k: usize, seed: u64) -> Self {
        Self {
            k,
            affine: true,
            tau: TauSelection::Auto,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub tau: f64,
    pub r_squared: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauChoice {
    pub tau: f64,
    pub r_squared: f64,
    /// False when no τ on the grid reaches the band; `tau` is then the
    /// closest grid point.
    pub in_band: bool,
    pub sweep: Vec<SweepPoint>,
}

fn r2_from_spectrum(singular_values: &[f64], tau: f64, total: f64) -> f64 {
    let residual: f64 = singular_values
        .iter()
        .map(|s| {
            let keep = 1.0 - shrinkage(*s, tau);
            s * s * keep * keep
        })
        .sum();
    1.0 - residual / total
}

/// Sweeps τ on a log grid and picks the smallest τ with R² inside
/// [`R2_BAND`], bisecting in log-τ when consecutive grid points jump over
/// the band.
pub fn select_tau(z: &DMatrix<f64>) -> Result<TauChoice> {
    let svd = skinny_svd(z);
    select_tau_from_svd(z, &svd)
}

fn select_tau_from_svd(z: &DMatrix<f64>, svd: &SkinnySvd) -> Result<TauChoice> {
    let total = metrics::centered_energy(z);
    if total <= 0.0 {
        return Err(Error::Degenerate("all samples are identical; R² is undefined".into()));
    }
    let (smax, smin) = match (svd.singular_values.first(), svd.singular_values.last()) {
        (Some(a), Some(b)) => (*a, *b),
        _ => return Err(Error::Degenerate("latent matrix has rank zero".into())),
    };
    let lo = (0.01 / (smax * smax)).log10();
    let hi = (1e4 / (smin * smin)).log10();
    let steps = (((hi - lo) * GRID_POINTS_PER_DECADE as f64).ceil() as usize).max(1);
    let sweep: Vec<SweepPoint> = (0..=steps)
        .map(|i| {
            let tau = 10f64.powf(lo + (hi - lo) * i as f64 / steps as f64);
            SweepPoint {
                tau,
                r_squared: r2_from_spectrum(&svd.singular_values, tau, total),
            }
        })
        .collect();

    let (band_lo, band_hi) = R2_BAND;
    let in_band = |r: f64| (band_lo..=band_hi).contains(&r);
    for (i, pt) in sweep.iter().enumerate() {
        if in_band(pt.r_squared) {
            return Ok(TauChoice { tau: pt.tau, r_squared: pt.r_squared, in_band: true, sweep });
        }
        if pt.r_squared > band_hi && i > 0 && sweep[i - 1].r_squared < band_lo {
            let (mut a, mut b) = (sweep[i - 1].tau.ln(), pt.tau.ln());
            for _ in 0..BISECTION_STEPS {
                let mid = 0.5 * (a + b);
                let r = r2_from_spectrum(&svd.singular_values, mid.exp(), total);
                if in_band(r) {
                    return Ok(TauChoice { tau: mid.exp(), r_squared: r, in_band: true, sweep });
                }
                if r < band_lo {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            break;
        }
    }
    let target = 0.5 * (band_lo + band_hi);
    let closest = sweep
        .iter()
        .min_by(|a, b| (a.r_squared - target).abs().total_cmp(&(b.r_squared - target).abs()))
        .copied()
        .expect("sweep is nonempty");
    Ok(TauChoice { tau: closest.tau, r_squared: closest.r_squared, in_band: false, sweep })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClusterReport {
    pub labels: Vec<usize>,
    #[serde(rename = "K")]
    pub k: usize,
    pub affine: bool,
    pub tau: f64,
    pub r_squared: f64,
    pub tau_in_band: bool,
    pub accuracy: Option<f64>,
    /// `confusion[truth][pred]`, present when ground truth is given.
    pub confusion: Option<Vec<Vec<usize>>>,
    pub sweep: Vec<SweepPoint>,
}

/// Relaxed self-expression followed by spectral clustering of `z` (`q × n`).
pub fn cluster_latent(z: &DMatrix<f64>, opts: &ClusterOptions, truth: Option<&[usize]>) -> Result<ClusterReport> {
    if z.ncols() == 0 {
        return Err(Error::InvalidArgument("no samples to cluster".into()));
    }
    let data = if opts.affine { affine_lift(z) } else { z.clone() };
    let svd = skinny_svd(&data);
    let (tau, in_band, sweep) = match opts.tau {
        TauSelection::Auto => {
            let choice = select_tau_from_svd(&data, &svd)?;
            (choice.tau, choice.in_band, choice.sweep)
        }
        TauSelection::Fixed(t) => (t, true, Vec::new()),
    };
    let se = self_expression::self_expression_from_svd(&data, &svd, tau)?;
    let labels = spectral_cluster(&se.q, opts.k, opts.seed)?;
    let (accuracy, confusion) = match truth {
        Some(t) => {
            let (acc, _) = clustering_accuracy(&labels, t)?;
            let k = labels.iter().chain(t).max().map_or(0, |m| m + 1);
            (Some(acc), Some(confusion_matrix(&labels, t, k)))
        }
        None => (None, None),
    };
    Ok(ClusterReport {
        labels,
        k: opts.k,
        affine: opts.affine,
        tau,
        r_squared: se.r_squared,
        tau_in_band: in_band,
        accuracy,
        confusion,
        sweep,
    })
}
