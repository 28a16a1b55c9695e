use nalgebra::{DMatrix, DVector};

use crate::dataset::Matrix;
use crate::error::{Error, Result};

/// Ridge regression with an unpenalised intercept, solved on the centred
/// design.
#[derive(Debug, Clone)]
pub struct LinearModel {
    intercept: f64,
    coef: Vec<f64>,
    lambda: f64,
}

impl LinearModel {
    pub fn fit(features: &Matrix, targets: &[f64], ridge_lambda: Option<f64>) -> Result<Self> {
        let (m, d) = (features.rows(), features.cols());
        let t_mean = targets.iter().sum::<f64>() / m as f64;
        if d == 0 {
            return Ok(Self { intercept: t_mean, coef: Vec::new(), lambda: 0.0 });
        }
        if let Some(l) = ridge_lambda {
            if !(l >= 0.0 && l.is_finite()) {
                return Err(Error::invalid(format!("ridge lambda must be >= 0, got {l}")));
            }
        }
        let means: Vec<f64> = (0..d).map(|j| (0..m).map(|i| features.get(i, j)).sum::<f64>() / m as f64).collect();
        let g = DMatrix::from_fn(m, d, |i, j| features.get(i, j) - means[j]);
        let t = DVector::from_iterator(m, targets.iter().map(|v| v - t_mean));

        let mut gram = g.transpose() * &g;
        let lambda = ridge_lambda.unwrap_or_else(|| 1e-6 * gram.trace() / d as f64);
        for j in 0..d {
            gram[(j, j)] += lambda;
        }
        let rhs = g.transpose() * t;
        let beta = match gram.clone().cholesky() {
            Some(ch) => ch.solve(&rhs),
            // Rank-deficient without penalty: minimum-norm least squares.
            None => gram
                .svd(true, true)
                .solve(&rhs, 1e-12)
                .map_err(|e| Error::Degenerate(format!("linear solve failed: {e}")))?,
        };
        let coef: Vec<f64> = beta.iter().copied().collect();
        let intercept = t_mean - coef.iter().zip(&means).map(|(b, mu)| b * mu).sum::<f64>();
        Ok(Self { intercept, coef, lambda })
    }

    pub fn intercept(&self) -> f64 {
        self.intercept
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coef
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    #[inline]
    pub fn predict(&self, row: &[f64]) -> f64 {
        self.intercept + self.coef.iter().zip(row).map(|(b, x)| b * x).sum::<f64>()
    }
}
