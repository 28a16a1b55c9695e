//! Partial generalized measure of correlation
//!
//! ```text
//! r2(Y, W | Z) = E[(m(X) - h(Z))^2] / E[(Y - h(Z))^2]
//! ```
//!
//! estimated on a balanced split with cross-fitting: each half trains m and
//! h, the other half evaluates. The numerator uses the residual form
//! `E(Y - h)^2 - E(Y - m)^2`. The interval comes from the plug-in second
//! moment of the influence function
//!
//! ```text
//! Phi_i = [(m_i - h_i)^2 + 2 eps_i (m_i - h_i)] / s2 - R* eta_i^2 / s2^2
//! ```
//!
//! with cross-fitted m_i, h_i, eps_i = Y_i - m_i, eta_i = Y_i - h_i.

use serde::{Deserialize, Serialize};

use crate::dataset::{make_split_sized, Dataset, SplitPlan};
use crate::dist;
use crate::error::{Error, Result};
use crate::regress::{fit, predict_all, screen_features, FittedModel, RegressorSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PgmcEstimate {
    pub rn_star: f64,
    pub sigma2_star: f64,
    pub r2_hat: f64,
    pub r2_clamped: f64,
    pub var_phi: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// The interval intersected with [0, 1].
    pub ci_low_truncated: f64,
    pub ci_high_truncated: f64,
    pub alpha: f64,
    pub n1: usize,
    pub n2: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub screening: Option<ScreeningInfo>,
}

impl PgmcEstimate {
    pub fn ci_length(&self) -> f64 {
        self.ci_high - self.ci_low
    }

    pub fn covers(&self, r2: f64) -> bool {
        self.ci_low <= r2 && r2 <= self.ci_high
    }
}

/// Columns retained by screening for the fits trained on each half.
/// `x_cols` index X = (Z, W); `z_cols` index Z.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreeningInfo {
    pub keep: usize,
    pub d1_x_cols: Vec<usize>,
    pub d1_z_cols: Vec<usize>,
    pub d2_x_cols: Vec<usize>,
    pub d2_z_cols: Vec<usize>,
}

/// `n^-1 sum resid_h^2 - n^-1 sum resid_m^2`.
pub fn compute_rn(resid_h: &[f64], resid_m: &[f64]) -> Result<f64> {
    if resid_h.len() != resid_m.len() {
        return Err(Error::DimensionMismatch { expected: resid_h.len(), got: resid_m.len() });
    }
    if resid_h.is_empty() {
        return Err(Error::invalid("empty evaluation sample"));
    }
    let n = resid_h.len() as f64;
    let msq = |v: &[f64]| v.iter().map(|r| r * r).sum::<f64>() / n;
    Ok(msq(resid_h) - msq(resid_m))
}

/// Balanced split: D1 gets ceil(N / 2) rows.
pub fn balanced_split(n: usize, seed: u64) -> Result<SplitPlan> {
    make_split_sized(n, n.div_ceil(2), seed)
}

struct HalfFit {
    m: FittedModel,
    h: FittedModel,
    x_cols: Vec<usize>,
    z_cols: Vec<usize>,
}

impl HalfFit {
    fn train(
        data: &Dataset,
        rows: &[usize],
        spec_m: &RegressorSpec,
        spec_h: &RegressorSpec,
        keep: Option<usize>,
    ) -> Result<Self> {
        let x = data.x_rows(rows);
        let z = data.z_rows(rows);
        let y = data.y_at(rows);
        let (x_cols, z_cols) = match keep {
            None => ((0..data.p()).collect(), (0..data.p1()).collect()),
            Some(k) => {
                let mut xc = screen_features(&x, &y, k)?;
                xc.sort_unstable();
                let mut zc = if data.p1() > 0 { screen_features(&z, &y, k)? } else { Vec::new() };
                zc.sort_unstable();
                (xc, zc)
            }
        };
        let m = fit(spec_m, &x.select_cols(&x_cols), &y)?;
        let h = fit(spec_h, &z.select_cols(&z_cols), &y)?;
        Ok(Self { m, h, x_cols, z_cols })
    }

    /// (m, h) predictions on `rows`.
    fn predict(&self, data: &Dataset, rows: &[usize]) -> Result<(Vec<f64>, Vec<f64>)> {
        let m = predict_all(&self.m, &data.x_rows(rows).select_cols(&self.x_cols))?;
        let h = predict_all(&self.h, &data.z_rows(rows).select_cols(&self.z_cols))?;
        Ok((m, h))
    }
}

fn check_inputs(data: &Dataset, alpha: f64) -> Result<()> {
    if data.n() < 8 {
        return Err(Error::TooFewRows { needed: 8, got: data.n() });
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

fn estimate(
    data: &Dataset,
    spec_m: &RegressorSpec,
    spec_h: &RegressorSpec,
    alpha: f64,
    plan: &SplitPlan,
    keep: Option<usize>,
) -> Result<PgmcEstimate> {
    check_inputs(data, alpha)?;
    let n = data.n();
    let (d1, d2) = (&plan.d1_idx, &plan.d2_idx);
    let fit1 = HalfFit::train(data, d1, spec_m, spec_h, keep)?;
    let fit2 = HalfFit::train(data, d2, spec_m, spec_h, keep)?;

    // Cross-fitted values, indexed by row.
    let mut m_cf = vec![0.0; n];
    let mut h_cf = vec![0.0; n];
    for (model, rows) in [(&fit1, d2), (&fit2, d1)] {
        let (m, h) = model.predict(data, rows)?;
        for (k, &i) in rows.iter().enumerate() {
            m_cf[i] = m[k];
            h_cf[i] = h[k];
        }
    }
    let y = data.y();
    let half = |rows: &[usize]| -> Result<(f64, f64)> {
        let rh: Vec<f64> = rows.iter().map(|&i| y[i] - h_cf[i]).collect();
        let rm: Vec<f64> = rows.iter().map(|&i| y[i] - m_cf[i]).collect();
        let s2 = rh.iter().map(|r| r * r).sum::<f64>() / rows.len() as f64;
        Ok((compute_rn(&rh, &rm)?, s2))
    };
    let (rn, s2) = half(d2)?;
    let (rn_swap, s2_swap) = half(d1)?;
    let rn_star = (rn + rn_swap) / 2.0;
    let sigma2_star = (s2 + s2_swap) / 2.0;
    if sigma2_star.is_nan() || sigma2_star <= 0.0 {
        return Err(Error::Degenerate("E(Y - h(Z))^2 estimate is zero: Y is a function of Z".into()));
    }
    let r2_hat = rn_star / sigma2_star;

    let var_phi = (0..n)
        .map(|i| {
            let diff = m_cf[i] - h_cf[i];
            let eps = y[i] - m_cf[i];
            let eta = y[i] - h_cf[i];
            let phi =
                (diff * diff + 2.0 * eps * diff) / sigma2_star - rn_star * eta * eta / (sigma2_star * sigma2_star);
            phi * phi
        })
        .sum::<f64>()
        / n as f64;
    let z = dist::normal_quantile(alpha / 2.0)?;
    let half_width = z * (var_phi / n as f64).sqrt();
    let (ci_low, ci_high) = (r2_hat - half_width, r2_hat + half_width);

    let screening = keep.map(|k| ScreeningInfo {
        keep: k,
        d1_x_cols: fit1.x_cols.clone(),
        d1_z_cols: fit1.z_cols.clone(),
        d2_x_cols: fit2.x_cols.clone(),
        d2_z_cols: fit2.z_cols.clone(),
    });
    Ok(PgmcEstimate {
        rn_star,
        sigma2_star,
        r2_hat,
        r2_clamped: r2_hat.clamp(0.0, 1.0),
        var_phi,
        ci_low,
        ci_high,
        ci_low_truncated: ci_low.max(0.0),
        ci_high_truncated: ci_high.min(1.0),
        alpha,
        n1: plan.n1(),
        n2: plan.n2(),
        seed: plan.seed,
        screening,
    })
}

/// Estimate on an explicit partition.
pub fn pgmc_on_split(
    data: &Dataset,
    spec_m: &RegressorSpec,
    spec_h: &RegressorSpec,
    alpha: f64,
    plan: &SplitPlan,
) -> Result<PgmcEstimate> {
    estimate(data, spec_m, spec_h, alpha, plan, None)
}

pub fn pgmc_estimate(
    data: &Dataset,
    spec_m: &RegressorSpec,
    spec_h: &RegressorSpec,
    alpha: f64,
    seed: u64,
) -> Result<PgmcEstimate> {
    check_inputs(data, alpha)?;
    estimate(data, spec_m, spec_h, alpha, &balanced_split(data.n(), seed)?, None)
}

/// Same as [`pgmc_estimate`], but each training half first keeps only its
/// `keep` covariates with the largest distance correlation to Y (separately
/// for the X features of m and the Z features of h).
pub fn pgmc_with_screening(
    data: &Dataset,
    keep: usize,
    spec_m: &RegressorSpec,
    spec_h: &RegressorSpec,
    alpha: f64,
    seed: u64,
) -> Result<PgmcEstimate> {
    if keep == 0 {
        return Err(Error::invalid("keep must be positive"));
    }
    check_inputs(data, alpha)?;
    estimate(data, spec_m, spec_h, alpha, &balanced_split(data.n(), seed)?, Some(keep))
}
