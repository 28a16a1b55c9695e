//! Marginal distance-correlation screening.

use crate::dataset::Matrix;
use crate::error::{Error, Result};

/// Double-centred pairwise |a_i - a_j| matrix (row-major, m x m).
fn centred_distances(v: &[f64]) -> Vec<f64> {
    let m = v.len();
    let mut a = vec![0.0; m * m];
    let mut row_mean = vec![0.0; m];
    for i in 0..m {
        for j in 0..m {
            let d = (v[i] - v[j]).abs();
            a[i * m + j] = d;
            row_mean[i] += d;
        }
        row_mean[i] /= m as f64;
    }
    let grand = row_mean.iter().sum::<f64>() / m as f64;
    for i in 0..m {
        for j in 0..m {
            a[i * m + j] += grand - row_mean[i] - row_mean[j];
        }
    }
    a
}

struct Centred {
    matrix: Vec<f64>,
    /// mean of the squared centred entries (dVar^2)
    dvar2: f64,
}

impl Centred {
    fn new(v: &[f64]) -> Self {
        let matrix = centred_distances(v);
        let dvar2 = matrix.iter().map(|a| a * a).sum::<f64>() / matrix.len() as f64;
        Self { matrix, dvar2 }
    }
}

/// dCor between one feature and the targets given the targets' centred
/// matrix. The feature side is never materialised: since B has zero row and
/// column sums, mean(A o B) = mean(a o B) for the raw distances a.
fn dcor_against(feature: &[f64], target: &Centred) -> f64 {
    let m = feature.len();
    let mut row_mean = vec![0.0; m];
    let mut cross = 0.0;
    let mut sq = 0.0;
    for i in 0..m {
        let b = &target.matrix[i * m..(i + 1) * m];
        let mut rs = 0.0;
        for j in 0..m {
            let d = (feature[i] - feature[j]).abs();
            rs += d;
            sq += d * d;
            cross += d * b[j];
        }
        row_mean[i] = rs / m as f64;
    }
    let mm = (m * m) as f64;
    let grand = row_mean.iter().sum::<f64>() / m as f64;
    // mean(A o A) = mean(a^2) - 2 mean_i(rowmean_i^2) + grand^2 for symmetric a.
    let dvar2_x = sq / mm - 2.0 * row_mean.iter().map(|r| r * r).sum::<f64>() / m as f64 + grand * grand;
    let dcov2 = (cross / mm).max(0.0);
    if dvar2_x <= 0.0 || target.dvar2 <= 0.0 {
        return 0.0;
    }
    (dcov2 / (dvar2_x * target.dvar2).sqrt()).sqrt().min(1.0)
}

/// Empirical distance correlation of two equal-length samples (0 when either
/// side has zero distance variance).
pub fn distance_correlation(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), got: b.len() });
    }
    if a.is_empty() {
        return Ok(0.0);
    }
    Ok(dcor_against(a, &Centred::new(b)))
}

/// Indices of the `keep` columns with the largest distance correlation to
/// `targets`, in descending order; ties go to the lower index.
pub fn screen_features(features: &Matrix, targets: &[f64], keep: usize) -> Result<Vec<usize>> {
    let (m, d) = (features.rows(), features.cols());
    if m < 4 {
        return Err(Error::TooFewRows { needed: 4, got: m });
    }
    if targets.len() != m {
        return Err(Error::DimensionMismatch { expected: m, got: targets.len() });
    }
    if keep == 0 {
        return Err(Error::invalid("keep must be positive"));
    }
    let target = Centred::new(targets);
    let mut scored: Vec<(f64, usize)> = (0..d).map(|j| (dcor_against(&features.column(j), &target), j)).collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    Ok(scored.into_iter().take(keep.min(d)).map(|(_, j)| j).collect())
}
