use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// `‖Z − Z̄‖²_F` with `Z̄` the per-row mean over samples (columns).
pub(crate) fn centered_energy(z: &DMatrix<f64>) -> f64 {
    let n = z.ncols() as f64;
    z.row_iter()
        .map(|row| {
            let mean = row.sum() / n;
            row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
        })
        .sum()
}

/// `R² = 1 − ‖Z − ZQ‖²_F / ‖Z − Z̄‖²_F`.
pub fn reconstruction_r2(z: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<f64> {
    if q.nrows() != z.ncols() || q.ncols() != z.ncols() {
        return Err(Error::DimensionMismatch {
            context: "self-expression matrix",
            expected: z.ncols(),
            actual: q.nrows(),
        });
    }
    let total = centered_energy(z);
    if total <= 0.0 {
        return Err(Error::Degenerate(
            "all samples are identical; R² is undefined".into(),
        ));
    }
    let residual = (z - z * q).norm_squared();
    Ok(1.0 - residual / total)
}

/// Largest K for which permutations are enumerated.
pub const MAX_MATCHED_CLUSTERS: usize = 10;

/// Best agreement between predicted and true labels over all relabelings of
/// the prediction. Returns the accuracy and the map `pred label → truth label`.
pub fn clustering_accuracy(pred: &[usize], truth: &[usize]) -> Result<(f64, Vec<usize>)> {
    if pred.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            context: "label vectors",
            expected: truth.len(),
            actual: pred.len(),
        });
    }
    if pred.is_empty() {
        return Err(Error::InvalidArgument("no labels to compare".into()));
    }
    let k = pred.iter().chain(truth).max().map_or(0, |m| m + 1);
    if k > MAX_MATCHED_CLUSTERS {
        return Err(Error::InvalidArgument(format!(
            "{k} clusters exceed the brute-force matching limit of {MAX_MATCHED_CLUSTERS}"
        )));
    }
    let confusion = confusion_matrix(pred, truth, k);

    let mut best = (0usize, (0..k).collect::<Vec<_>>());
    let mut current = vec![0usize; k];
    let mut used = vec![false; k];
    search(&confusion, 0, 0, &mut current, &mut used, &mut best);
    Ok((best.0 as f64 / pred.len() as f64, best.1))
}

fn search(
    confusion: &[Vec<usize>],
    pred_label: usize,
    score: usize,
    current: &mut Vec<usize>,
    used: &mut Vec<bool>,
    best: &mut (usize, Vec<usize>),
) {
    let k = current.len();
    if pred_label == k {
        if score > best.0 {
            *best = (score, current.clone());
        }
        return;
    }
    for t in 0..k {
        if used[t] {
            continue;
        }
        used[t] = true;
        current[pred_label] = t;
        search(confusion, pred_label + 1, score + confusion[t][pred_label], current, used, best);
        used[t] = false;
    }
}

/// `confusion[truth][pred]` counts.
pub fn confusion_matrix(pred: &[usize], truth: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut c = vec![vec![0usize; k]; k];
    for (p, t) in pred.iter().zip(truth) {
        c[*t][*p] += 1;
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::seeded_rng;
    use rand::Rng;

    #[test]
    fn perfect_reconstruction_gives_one() {
        let z = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 4.0, 0.0, -1.0, 3.0]);
        let r2 = reconstruction_r2(&z, &DMatrix::identity(3, 3)).unwrap();
        assert_eq!(r2, 1.0);
    }

    #[test]
    fn zero_q_with_centered_data_gives_zero() {
        let z = DMatrix::from_row_slice(2, 4, &[1.0, -1.0, 2.0, -2.0, 0.5, 0.5, -0.5, -0.5]);
        let r2 = reconstruction_r2(&z, &DMatrix::zeros(4, 4)).unwrap();
        assert!(r2.abs() < 1e-15);
    }

    #[test]
    fn constant_samples_are_degenerate() {
        let z = DMatrix::from_row_slice(2, 3, &[1.0, 1.0, 1.0, 2.0, 2.0, 2.0]);
        assert!(matches!(
            reconstruction_r2(&z, &DMatrix::identity(3, 3)),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn accuracy_is_permutation_invariant() {
        let truth = [0, 0, 1, 1, 2, 2];
        assert_eq!(clustering_accuracy(&truth, &truth).unwrap().0, 1.0);
        let swapped = [1, 1, 0, 0, 2, 2];
        let (acc, map) = clustering_accuracy(&swapped, &truth).unwrap();
        assert_eq!(acc, 1.0);
        assert_eq!(map, vec![1, 0, 2]);
    }

    #[test]
    fn partial_agreement() {
        let (acc, _) = clustering_accuracy(&[0, 0, 0, 1], &[0, 0, 1, 1]).unwrap();
        assert_eq!(acc, 0.75);
    }

    #[test]
    fn random_guessing_scores_near_chance() {
        let mut rng = seeded_rng(17, 0);
        let truth: Vec<usize> = (0..200).map(|i| i / 50).collect();
        let mut accs = Vec::new();
        for _ in 0..50 {
            let pred: Vec<usize> = (0..200).map(|_| rng.random_range(0..4)).collect();
            accs.push(clustering_accuracy(&pred, &truth).unwrap().0);
        }
        let mean = accs.iter().sum::<f64>() / accs.len() as f64;
        assert!((mean - 0.25).abs() <= 0.1, "{mean}");
    }

    #[test]
    fn too_many_clusters_rejected() {
        let labels: Vec<usize> = (0..11).collect();
        assert!(clustering_accuracy(&labels, &labels).is_err());
    }
}
