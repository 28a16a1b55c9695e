//! Partial mean independence test.
//!
//! On a split (D1, D2), fit h(Z) = E(Y|Z) and g(X) = E(Y - h(Z) | X) on D1,
//! then on D2 compare g against the D2 mean of the residuals Y - h(Z):
//!
//! ```text
//! T_n  = n2^-1 sum_i [ g(X_i) - mean_j (Y_j - h(Z_j)) ]^2
//! V_n  = n2 T_n / sigma2,   sigma2 = n2^-1 sum_i (Y_i - h(Z_i))^2
//! V_n* = V_n + tau sum_i g(X_i)^2
//! ```
//!
//! Both V_n and V_n* are referred to the chi-square(1) upper tail.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{self, permute_w, Dataset, SplitPlan};
use crate::dist::{self, Aggregator};
use crate::error::{Error, Result};
use crate::regress::{fit, predict_all, FittedModel, RegressorSpec};
use crate::rng;

/// How g is estimated on D1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GRecipe {
    /// Regress the in-sample residuals Y - h(Z) on X.
    #[default]
    Residual,
    /// Fit m(X) = E(Y|X) directly and take g = m - h.
    Difference,
}

impl std::str::FromStr for GRecipe {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "residual" => Ok(GRecipe::Residual),
            "difference" => Ok(GRecipe::Difference),
            other => Err(Error::invalid(format!("unknown g recipe \"{other}\""))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PmitConfig {
    pub spec_h: RegressorSpec,
    pub spec_g: RegressorSpec,
    /// Power-enhancement weight.
    pub tau: f64,
    pub recipe: GRecipe,
}

impl PmitConfig {
    pub fn new(spec_h: RegressorSpec, spec_g: RegressorSpec) -> Self {
        Self { spec_h, spec_g, tau: 1.0, recipe: GRecipe::Residual }
    }

    pub fn with_tau(mut self, tau: f64) -> Self {
        self.tau = tau;
        self
    }

    pub fn with_recipe(mut self, recipe: GRecipe) -> Self {
        self.recipe = recipe;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PmitResult {
    pub t_n: f64,
    pub sigma2_yz: f64,
    pub v_n: f64,
    pub v_n_star: f64,
    pub p_value: f64,
    pub p_value_enhanced: f64,
    pub xi: f64,
    pub n1: usize,
    pub n2: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CmitResult {
    pub t_1n: f64,
    pub sigma2_y: f64,
    pub v: f64,
    pub p_value: f64,
    pub xi: f64,
    pub n1: usize,
    pub n2: usize,
    pub seed: u64,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// `n^-1 sum_i (g_i - mean(resid))^2`.
pub fn compute_tn(g_hat: &[f64], resid: &[f64]) -> Result<f64> {
    if g_hat.len() != resid.len() {
        return Err(Error::DimensionMismatch { expected: g_hat.len(), got: resid.len() });
    }
    if g_hat.is_empty() {
        return Err(Error::invalid("empty evaluation sample"));
    }
    let centre = mean(resid);
    Ok(g_hat.iter().map(|g| (g - centre).powi(2)).sum::<f64>() / g_hat.len() as f64)
}

/// Mean of squared residuals (no centring).
pub fn sigma2_yz_hat(resid: &[f64]) -> Result<f64> {
    if resid.is_empty() {
        return Err(Error::invalid("empty residual vector"));
    }
    let s = resid.iter().map(|r| r * r).sum::<f64>() / resid.len() as f64;
    if s <= 0.0 {
        return Err(Error::Degenerate("all residuals are zero: the response is fitted exactly or constant".into()));
    }
    Ok(s)
}

/// Assembles a [`PmitResult`] from D2 predictions of g and residuals Y - h(Z).
pub fn statistic(g_hat: &[f64], resid: &[f64], tau: f64, plan: &SplitPlan) -> Result<PmitResult> {
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(Error::invalid(format!("tau must be finite and >= 0, got {tau}")));
    }
    let t_n = compute_tn(g_hat, resid)?;
    let sigma2_yz = sigma2_yz_hat(resid)?;
    let n2 = g_hat.len();
    let v_n = n2 as f64 * t_n / sigma2_yz;
    let v_n_star = v_n + tau * g_hat.iter().map(|g| g * g).sum::<f64>();
    Ok(PmitResult {
        t_n,
        sigma2_yz,
        v_n,
        v_n_star,
        p_value: dist::chi2_1_sf(v_n)?,
        p_value_enhanced: dist::chi2_1_sf(v_n_star)?,
        xi: plan.xi,
        n1: plan.n1(),
        n2,
        seed: plan.seed,
    })
}

fn check_w(data: &Dataset) -> Result<()> {
    if data.p2() == 0 {
        return Err(Error::invalid("the tested block W is empty"));
    }
    Ok(())
}

/// Fits h on the D1 rows of `data`.
pub fn fit_h(data: &Dataset, spec_h: &RegressorSpec, plan: &SplitPlan) -> Result<FittedModel> {
    fit(spec_h, &data.z_rows(&plan.d1_idx), &data.y_at(&plan.d1_idx))
}

/// Runs the test on an explicit split with an already fitted h.
pub fn pmit_with_h(data: &Dataset, cfg: &PmitConfig, plan: &SplitPlan, h: &FittedModel) -> Result<PmitResult> {
    check_w(data)?;
    let (d1, d2) = (&plan.d1_idx, &plan.d2_idx);
    let x1 = data.x_rows(d1);
    let y1 = data.y_at(d1);
    let h1 = predict_all(h, &data.z_rows(d1))?;
    let x2 = data.x_rows(d2);
    let y2 = data.y_at(d2);
    let h2 = predict_all(h, &data.z_rows(d2))?;

    let g2 = match cfg.recipe {
        GRecipe::Residual => {
            let targets: Vec<f64> = y1.iter().zip(&h1).map(|(y, h)| y - h).collect();
            let g = fit(&cfg.spec_g, &x1, &targets)?;
            predict_all(&g, &x2)?
        }
        GRecipe::Difference => {
            let m = fit(&cfg.spec_g, &x1, &y1)?;
            predict_all(&m, &x2)?.iter().zip(&h2).map(|(m, h)| m - h).collect()
        }
    };
    let resid: Vec<f64> = y2.iter().zip(&h2).map(|(y, h)| y - h).collect();
    statistic(&g2, &resid, cfg.tau, plan)
}

pub fn pmit_on_split(data: &Dataset, cfg: &PmitConfig, plan: &SplitPlan) -> Result<PmitResult> {
    check_w(data)?;
    let h = fit_h(data, &cfg.spec_h, plan)?;
    pmit_with_h(data, cfg, plan, &h)
}

/// One split at ratio `xi` drawn under `seed`.
pub fn pmit_single(data: &Dataset, cfg: &PmitConfig, xi: f64, seed: u64) -> Result<PmitResult> {
    check_w(data)?;
    let plan = dataset::make_split(data.n(), xi, seed)?;
    pmit_on_split(data, cfg, &plan)
}

/// Full-sample `N^-1 sum (Y_i - Ybar)^2`.
pub fn sigma2_y_hat(y: &[f64]) -> Result<f64> {
    if y.is_empty() {
        return Err(Error::invalid("empty response"));
    }
    let m = mean(y);
    let s = y.iter().map(|v| (v - m).powi(2)).sum::<f64>() / y.len() as f64;
    if s <= 0.0 {
        return Err(Error::Degenerate("the response is constant".into()));
    }
    Ok(s)
}

/// `n^-1 sum_i (m_i - mean(y_d2))^2`.
pub fn compute_t1n(m_hat: &[f64], y_d2: &[f64]) -> Result<f64> {
    compute_tn(m_hat, y_d2)
}

/// Overall significance test of all covariates (no control block):
/// `v = n2 T_1n / sigma2_y`, with sigma2_y taken over all N rows.
pub fn cmit_on_split(data: &Dataset, spec_m: &RegressorSpec, plan: &SplitPlan) -> Result<CmitResult> {
    let sigma2_y = sigma2_y_hat(data.y())?;
    let m = fit(spec_m, &data.x_rows(&plan.d1_idx), &data.y_at(&plan.d1_idx))?;
    let m2 = predict_all(&m, &data.x_rows(&plan.d2_idx))?;
    let t_1n = compute_t1n(&m2, &data.y_at(&plan.d2_idx))?;
    let n2 = plan.n2();
    let v = n2 as f64 * t_1n / sigma2_y;
    Ok(CmitResult { t_1n, sigma2_y, v, p_value: dist::chi2_1_sf(v)?, xi: plan.xi, n1: plan.n1(), n2, seed: plan.seed })
}

pub fn cmit_single(data: &Dataset, spec_m: &RegressorSpec, xi: f64, seed: u64) -> Result<CmitResult> {
    sigma2_y_hat(data.y())?;
    let plan = dataset::make_split(data.n(), xi, seed)?;
    cmit_on_split(data, spec_m, &plan)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CmitMulti {
    pub p_star: f64,
    pub aggregator: Aggregator,
    pub runs: Vec<CmitResult>,
}

/// `b` splits with seeds `seed + 1, ..., seed + b`, p-values aggregated.
pub fn cmit_multi(
    data: &Dataset,
    spec_m: &RegressorSpec,
    xi: f64,
    b: usize,
    aggregator: Aggregator,
    gamma_min: f64,
    seed: u64,
) -> Result<CmitMulti> {
    if b == 0 {
        return Err(Error::invalid("number of splits B must be >= 1"));
    }
    let runs = (1..=b as u64)
        .into_par_iter()
        .map(|k| cmit_single(data, spec_m, xi, seed.wrapping_add(k)))
        .collect::<Result<Vec<_>>>()?;
    let p: Vec<f64> = runs.iter().map(|r| r.p_value).collect();
    Ok(CmitMulti { p_star: aggregator.combine(&p, gamma_min)?, aggregator, runs })
}

/// Aggregated multi-split result. Plain and enhanced p-values are
/// aggregated separately.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiResult {
    pub p_star: f64,
    pub p_star_enhanced: f64,
    pub aggregator: Aggregator,
    pub runs: Vec<PmitResult>,
}

impl MultiResult {
    pub fn rejects(&self, alpha: f64) -> bool {
        self.p_star < alpha
    }

    pub fn rejects_enhanced(&self, alpha: f64) -> bool {
        self.p_star_enhanced < alpha
    }
}

/// `b` independent splits with seeds `seed + 1, ..., seed + b`.
pub fn pmit_multi(
    data: &Dataset,
    cfg: &PmitConfig,
    xi: f64,
    b: usize,
    aggregator: Aggregator,
    gamma_min: f64,
    seed: u64,
) -> Result<MultiResult> {
    if b == 0 {
        return Err(Error::invalid("number of splits B must be >= 1"));
    }
    let runs = (1..=b as u64)
        .into_par_iter()
        .map(|k| pmit_single(data, cfg, xi, seed.wrapping_add(k)))
        .collect::<Result<Vec<_>>>()?;
    let plain: Vec<f64> = runs.iter().map(|r| r.p_value).collect();
    let enhanced: Vec<f64> = runs.iter().map(|r| r.p_value_enhanced).collect();
    Ok(MultiResult {
        p_star: aggregator.combine(&plain, gamma_min)?,
        p_star_enhanced: aggregator.combine(&enhanced, gamma_min)?,
        aggregator,
        runs,
    })
}

/// How permutation replicates obtain h.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdaptiveMode {
    /// Each replicate draws its own split and refits h.
    #[default]
    Refit,
    /// Approximation: one split per candidate ratio, h fitted once and
    /// shared by all replicates (W-permutation leaves (Z, Y) untouched).
    ReuseH,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveConfig {
    pub candidates: Vec<f64>,
    /// Permutation replicates per candidate.
    pub m: usize,
    pub alpha: f64,
    pub mode: AdaptiveMode,
    /// Calibrate on the power-enhanced p-value instead of the plain one.
    pub use_enhanced: bool,
}

/// `{(k - 1) / k : 2 <= k <= kappa}`.
pub fn ratio_grid(kappa: usize) -> Vec<f64> {
    (2..=kappa).map(|k| (k - 1) as f64 / k as f64).collect()
}

impl Default for AdaptiveConfig {
    fn default() -> Self {
        Self { candidates: ratio_grid(10), m: 200, alpha: 0.05, mode: AdaptiveMode::Refit, use_enhanced: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioCheck {
    pub xi: f64,
    pub err_hat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveXi {
    pub xi: f64,
    pub err_hat: f64,
    /// False when no candidate met the criterion and the largest was used.
    pub qualified: bool,
    /// Every candidate evaluated, in order.
    pub path: Vec<RatioCheck>,
}

/// Fraction of p-values at or below `alpha`.
pub fn estimated_type_i_error(p: &[f64], alpha: f64) -> f64 {
    if p.is_empty() {
        return 0.0;
    }
    p.iter().filter(|&&v| v <= alpha).count() as f64 / p.len() as f64
}

/// Walks the candidates in ascending order and stops at the first whose
/// permutation p-values (from `pvalues_at`) give an estimated type I error
/// of at most `alpha`.
pub fn select_ratio<F>(candidates: &[f64], alpha: f64, mut pvalues_at: F) -> Result<AdaptiveXi>
where
    F: FnMut(f64) -> Result<Vec<f64>>,
{
    if candidates.is_empty() {
        return Err(Error::invalid("empty split-ratio candidate list"));
    }
    if candidates.iter().any(|&c| !(c > 0.0 && c < 1.0)) {
        return Err(Error::invalid("split-ratio candidates must lie in (0, 1)"));
    }
    if candidates.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("split-ratio candidates must be strictly ascending"));
    }
    let mut path = Vec::new();
    for &xi in candidates {
        let err_hat = estimated_type_i_error(&pvalues_at(xi)?, alpha);
        path.push(RatioCheck { xi, err_hat });
        if err_hat <= alpha {
            return Ok(AdaptiveXi { xi, err_hat, qualified: true, path });
        }
    }
    let last = path.last().cloned().expect("candidates are non-empty");
    Ok(AdaptiveXi { xi: last.xi, err_hat: last.err_hat, qualified: false, path })
}

/// Permutation calibration of the split ratio: for each candidate, W is
/// shuffled `m` times (so the null holds), the test is run on each shuffled
/// copy and the rejection rate estimates the type I error.
pub fn adaptive_xi(data: &Dataset, cfg: &PmitConfig, acfg: &AdaptiveConfig, seed: u64) -> Result<AdaptiveXi> {
    check_w(data)?;
    if acfg.m == 0 {
        return Err(Error::invalid("number of permutation replicates M must be >= 1"));
    }
    let pick = |r: &PmitResult| {
        if acfg.use_enhanced {
            r.p_value_enhanced
        } else {
            r.p_value
        }
    };
    select_ratio(&acfg.candidates, acfg.alpha, |xi| match acfg.mode {
        AdaptiveMode::Refit => (0..acfg.m as u64)
            .into_par_iter()
            .map(|m| {
                let shuffled = permute_w(data, rng::derive(seed, 1, m))?;
                pmit_single(&shuffled, cfg, xi, rng::derive(seed, 2, m)).map(|r| pick(&r))
            })
            .collect(),
        AdaptiveMode::ReuseH => {
            let plan = dataset::make_split(data.n(), xi, rng::derive(seed, 2, 0))?;
            let h = fit_h(data, &cfg.spec_h, &plan)?;
            (0..acfg.m as u64)
                .into_par_iter()
                .map(|m| {
                    let shuffled = permute_w(data, rng::derive(seed, 1, m))?;
                    pmit_with_h(&shuffled, cfg, &plan, &h).map(|r| pick(&r))
                })
                .collect()
        }
    })
}

/// [`adaptive_xi`] for the unconditional test: rows of W are shuffled
/// against Y and `cmit_single` supplies the p-values.
pub fn cmit_adaptive_xi(
    data: &Dataset,
    spec_m: &RegressorSpec,
    acfg: &AdaptiveConfig,
    seed: u64,
) -> Result<AdaptiveXi> {
    check_w(data)?;
    if acfg.m == 0 {
        return Err(Error::invalid("number of permutation replicates M must be >= 1"));
    }
    select_ratio(&acfg.candidates, acfg.alpha, |xi| {
        (0..acfg.m as u64)
            .into_par_iter()
            .map(|m| {
                let shuffled = permute_w(data, rng::derive(seed, 1, m))?;
                cmit_single(&shuffled, spec_m, xi, rng::derive(seed, 2, m)).map(|r| r.p_value)
            })
            .collect()
    })
}
