use crate::dataset::Matrix;
use crate::error::{Error, Result};

/// k-nearest-neighbour average under unscaled Euclidean distance. Ties in
/// distance go to the lower training index.
#[derive(Debug, Clone)]
pub struct KnnModel {
    train: Matrix,
    targets: Vec<f64>,
    k: usize,
}

impl KnnModel {
    pub fn fit(features: &Matrix, targets: &[f64], k: usize) -> Result<Self> {
        if k == 0 || k > features.rows() {
            return Err(Error::invalid(format!("knn needs 1 <= k <= m, got k = {k} with m = {}", features.rows())));
        }
        Ok(Self { train: features.clone(), targets: targets.to_vec(), k })
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        let m = self.train.rows();
        if self.k == m {
            return self.targets.iter().sum::<f64>() / m as f64;
        }
        let mut dist: Vec<(f64, usize)> = (0..m)
            .map(|i| {
                let d2 = self.train.row(i).iter().zip(row).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
                (d2, i)
            })
            .collect();
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        dist.select_nth_unstable_by(self.k - 1, cmp);
        dist[..self.k].iter().map(|&(_, i)| self.targets[i]).sum::<f64>() / self.k as f64
    }
}
