//! Tail probabilities and p-value aggregation.

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

use serde::{Deserialize, Serialize};
use statrs::function::erf::{erfc, erfc_inv};

use crate::error::{Error, Result};

/// p-values are clamped into `[P_CLAMP, 1 - P_CLAMP]` before the Cauchy
/// transform so the tangent stays finite.
pub const P_CLAMP: f64 = 1e-15;

/// Default lower end of the quantile-aggregation grid.
pub const DEFAULT_GAMMA_MIN: f64 = 0.05;

/// Number of equally spaced gamma values in `[gamma_min, 1]`.
pub const GAMMA_GRID: usize = 100;

/// P(chi2_1 > v) = erfc(sqrt(v / 2)).
pub fn chi2_1_sf(v: f64) -> Result<f64> {
    if !v.is_finite() || v < 0.0 {
        return Err(Error::invalid(format!("chi-square statistic must be finite and >= 0, got {v}")));
    }
    Ok(erfc((v / 2.0).sqrt()).clamp(0.0, 1.0))
}

/// Upper normal tail P(N(0,1) > z).
pub fn normal_sf(z: f64) -> f64 {
    0.5 * erfc(z * FRAC_1_SQRT_2)
}

/// z with P(N(0,1) > z) = alpha.
///
/// Starts from the inverse erfc and polishes with Newton steps on the tail
/// itself, which keeps the result accurate to ~1e-13 across (0, 1).
pub fn normal_quantile(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if alpha == 0.5 {
        return Ok(0.0);
    }
    // Work in the lower half and reflect, so the tail being matched is small.
    let (a, sign) = if alpha < 0.5 { (alpha, 1.0) } else { (1.0 - alpha, -1.0) };
    let mut z = SQRT_2 * erfc_inv(2.0 * a);
    for _ in 0..3 {
        let density = (-0.5 * z * z).exp() / (2.0 * PI).sqrt();
        if density == 0.0 {
            break;
        }
        let step = (normal_sf(z) - a) / density;
        z += step;
        if step.abs() < 1e-15 * z.abs().max(1.0) {
            break;
        }
    }
    Ok(sign * z)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Aggregator {
    #[default]
    Cauchy,
    Quantile,
}

impl Aggregator {
    pub fn combine(self, p: &[f64], gamma_min: f64) -> Result<f64> {
        match self {
            Aggregator::Cauchy => cauchy_combine(p),
            Aggregator::Quantile => quantile_combine(p, gamma_min),
        }
    }
}

impl std::str::FromStr for Aggregator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cauchy" => Ok(Aggregator::Cauchy),
            "quantile" => Ok(Aggregator::Quantile),
            other => Err(Error::invalid(format!("unknown aggregator \"{other}\""))),
        }
    }
}

fn check_pvalues(p: &[f64]) -> Result<()> {
    if p.is_empty() {
        return Err(Error::invalid("cannot aggregate an empty p-value vector"));
    }
    if let Some(v) = p.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::invalid(format!("p-value {v} outside [0, 1]")));
    }
    Ok(())
}

/// Cauchy combination: mean of tan((0.5 - p) pi), mapped back through the
/// standard Cauchy tail.
pub fn cauchy_combine(p: &[f64]) -> Result<f64> {
    check_pvalues(p)?;
    let t = p.iter().map(|&v| ((0.5 - v.clamp(P_CLAMP, 1.0 - P_CLAMP)) * PI).tan()).sum::<f64>() / p.len() as f64;
    Ok((0.5 - t.atan() / PI).clamp(0.0, 1.0))
}

/// Quantile aggregation over multiple splits with the adaptive gamma search.
///
/// `Q(gamma) = min(1, q_gamma(p / gamma))`, with `q_gamma` the ceil(gamma B)-th
/// order statistic, minimised over 100 equally spaced gamma in
/// `[gamma_min, 1]` and inflated by `1 - ln(gamma_min)`.
pub fn quantile_combine(p: &[f64], gamma_min: f64) -> Result<f64> {
    check_pvalues(p)?;
    if !(gamma_min > 0.0 && gamma_min < 1.0) {
        return Err(Error::invalid(format!("gamma_min must lie in (0, 1), got {gamma_min}")));
    }
    let mut sorted = p.to_vec();
    sorted.sort_by(f64::total_cmp);
    let b = sorted.len();
    let step = (1.0 - gamma_min) / (GAMMA_GRID - 1) as f64;
    let mut best = f64::INFINITY;
    for k in 0..GAMMA_GRID {
        let gamma = if k == GAMMA_GRID - 1 { 1.0 } else { gamma_min + k as f64 * step };
        // Scaling by 1/gamma is monotone, so the order statistic of p/gamma is
        // the order statistic of p divided by gamma.
        let rank = ((gamma * b as f64) - 1e-12).ceil().max(1.0) as usize;
        let q = (sorted[rank.min(b) - 1] / gamma).min(1.0);
        best = best.min(q);
    }
    Ok(((1.0 - gamma_min.ln()) * best).min(1.0))
}

/// One-sample Kolmogorov–Smirnov test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Asymptotic Kolmogorov tail P(K > x) = 2 sum (-1)^(k-1) exp(-2 k^2 x^2).
fn kolmogorov_sf(x: f64) -> f64 {
    if x < 0.18 {
        return 1.0;
    }
    let mut total = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * x * x).exp();
        total += if k % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * total).clamp(0.0, 1.0)
}

/// KS distance between the empirical distribution of `samples` and the
/// continuous `cdf`, with Stephens' finite-sample adjustment for the p-value.
pub fn ks_one_sample(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<KsResult> {
    if samples.is_empty() {
        return Err(Error::invalid("KS test needs at least one sample"));
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let statistic = s
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = cdf(v);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max);
    let root = n.sqrt();
    Ok(KsResult { statistic, p_value: kolmogorov_sf(statistic * (root + 0.12 + 0.11 / root)) })
}

/// P(chi2_1 <= v), for v >= 0.
pub fn chi2_1_cdf(v: f64) -> f64 {
    if v <= 0.0 {
        0.0
    } else {
        statrs::function::erf::erf((v / 2.0).sqrt())
    }
}
