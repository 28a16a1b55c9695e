//! Data generators and Monte Carlo drivers for size, power and coverage
//! studies.
//!
//! Families:
//!
//! * `A1`, `A2`: X = (Z, W) jointly AR(rho) normal, Y = Z1 + Z2 + s(theta'W) + e
//!   with s the identity (A1) or the square (A2).
//! * `B1`: independent AR(rho) blocks Z and W, Y = beta'Z + theta'W + e.
//! * `B2`: same covariates, Y = Z1 + 2 sin(W1 / 2) + e.
//! * `Interaction`: Z empty, Y = W1 * W2 + e.

use std::str::FromStr;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Matrix};
use crate::dist::Aggregator;
use crate::error::{Error, Result};
use crate::pgmc::{self, PgmcEstimate};
use crate::pmit::{self, AdaptiveConfig, AdaptiveXi, PmitConfig};
use crate::regress::{FixedFn, RegressorSpec};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    A1,
    A2,
    B1,
    B2,
    Interaction,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::A1 => "a1",
            Family::A2 => "a2",
            Family::B1 => "b1",
            Family::B2 => "b2",
            Family::Interaction => "interaction",
        }
    }

    fn is_a(self) -> bool {
        matches!(self, Family::A1 | Family::A2)
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "a1" => Ok(Family::A1),
            "a2" => Ok(Family::A2),
            "b1" => Ok(Family::B1),
            "b2" => Ok(Family::B2),
            "interaction" => Ok(Family::Interaction),
            other => Err(Error::invalid(format!("unknown scenario \"{other}\""))),
        }
    }
}

/// Signal pattern of the A family (ignored elsewhere).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    #[default]
    Null,
    Sparse,
    Dense,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::Null => "null",
            Regime::Sparse => "sparse",
            Regime::Dense => "dense",
        }
    }
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "null" => Ok(Regime::Null),
            "sparse" => Ok(Regime::Sparse),
            "dense" => Ok(Regime::Dense),
            other => Err(Error::invalid(format!("unknown regime \"{other}\""))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub family: Family,
    #[serde(default)]
    pub regime: Regime,
    pub n: usize,
    pub p1: usize,
    pub p2: usize,
    pub rho: f64,
    pub noise_sd: f64,
    #[serde(default)]
    pub seed: u64,
}

impl ScenarioSpec {
    /// Family defaults: A 25 + 25 columns, AR 0.3, noise sd 0.5; B p = 20
    /// split evenly, AR 0.5, unit noise; Interaction 25 independent W
    /// columns, noise sd 0.5.
    pub fn new(family: Family, regime: Regime, n: usize, seed: u64) -> Self {
        let (p1, p2, rho, noise_sd) = match family {
            Family::A1 | Family::A2 => (25, 25, 0.3, 0.5),
            Family::B1 | Family::B2 => (10, 10, 0.5, 1.0),
            Family::Interaction => (0, 25, 0.0, 0.5),
        };
        Self { family, regime, n, p1, p2, rho, noise_sd, seed }
    }

    /// Total dimension p; Z gets floor(p / 2) columns and W the rest.
    pub fn with_p(mut self, p: usize) -> Self {
        self.p1 = p / 2;
        self.p2 = p - p / 2;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_n(mut self, n: usize) -> Self {
        self.n = n;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::invalid("scenario needs N >= 1"));
        }
        if !(self.rho > -1.0 && self.rho < 1.0) {
            return Err(Error::invalid(format!("AR parameter must lie in (-1, 1), got {}", self.rho)));
        }
        if !(self.noise_sd > 0.0 && self.noise_sd.is_finite()) {
            return Err(Error::invalid("noise_sd must be positive"));
        }
        let ok = match self.family {
            Family::A1 | Family::A2 => self.p1 >= 2 && self.p2 >= 1,
            Family::B1 => self.p1 >= 3 && self.p2 >= 3,
            Family::B2 => self.p1 >= 1 && self.p2 >= 1,
            Family::Interaction => self.p1 == 0 && self.p2 >= 2,
        };
        if !ok {
            return Err(Error::invalid(format!(
                "dimensions p1 = {}, p2 = {} do not fit scenario {}",
                self.p1,
                self.p2,
                self.family.name()
            )));
        }
        Ok(())
    }

    /// Coefficients on W, by family and regime. Both A-family signals have
    /// squared norm 1/2.
    pub fn theta(&self) -> Vec<f64> {
        let p2 = self.p2;
        let leading = |k: usize, v: f64| -> Vec<f64> { (0..p2).map(|j| if j < k { v } else { 0.0 }).collect() };
        let half_norm = |k: usize| leading(k, (0.5 / k as f64).sqrt());
        match (self.family, self.regime) {
            (Family::A1 | Family::A2, Regime::Null) => vec![0.0; p2],
            (Family::A1, Regime::Sparse) => half_norm(2.min(p2)),
            (Family::A2, Regime::Sparse) => half_norm(5.min(p2)),
            (Family::A1, Regime::Dense) => half_norm(p2),
            (Family::A2, Regime::Dense) => half_norm((p2 / 2).max(1)),
            (Family::B1, _) => leading(3, 1.0 / 3f64.sqrt()),
            (Family::B2 | Family::Interaction, _) => vec![0.0; p2],
        }
    }

    /// Coefficients on Z for B1.
    pub fn beta(&self) -> Vec<f64> {
        (0..self.p1).map(|j| if j < 3 { 1.0 / 3f64.sqrt() } else { 0.0 }).collect()
    }
}

/// N x d normal matrix with corr(col_i, col_j) = rho^|i - j|, built column by
/// column: col_1 = e_1, col_j = rho col_{j-1} + sqrt(1 - rho^2) e_j.
pub fn gen_ar_normal(n: usize, d: usize, rho: f64, seed: u64) -> Result<Matrix> {
    if d == 0 {
        return Err(Error::invalid("AR normal block needs d >= 1"));
    }
    if !(rho > -1.0 && rho < 1.0) {
        return Err(Error::invalid(format!("AR parameter must lie in (-1, 1), got {rho}")));
    }
    let mut r = rng::seeded(seed);
    let scale = (1.0 - rho * rho).sqrt();
    let mut m = Matrix::zeros(n, d);
    for j in 0..d {
        for i in 0..n {
            let e: f64 = StandardNormal.sample(&mut r);
            let v = if j == 0 { e } else { rho * m.get(i, j - 1) + scale * e };
            m.set(i, j, v);
        }
    }
    Ok(m)
}

fn normal_vector(n: usize, sd: f64, seed: u64) -> Vec<f64> {
    let mut r = rng::seeded(seed);
    (0..n)
        .map(|_| {
            let e: f64 = StandardNormal.sample(&mut r);
            sd * e
        })
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Stacks Z and W side by side.
fn hstack(z: Option<&Matrix>, w: &Matrix) -> Matrix {
    let p1 = z.map_or(0, Matrix::cols);
    let n = w.rows();
    let mut x = Matrix::zeros(n, p1 + w.cols());
    for i in 0..n {
        let row = x.row_mut(i);
        if let Some(z) = z {
            row[..p1].copy_from_slice(z.row(i));
        }
        row[p1..].copy_from_slice(w.row(i));
    }
    x
}

/// Conditional mean E(Y | X) of the scenario, as a function of the X row
/// (Z columns first).
fn signal(spec: &ScenarioSpec) -> impl Fn(&[f64]) -> f64 + Send + Sync + 'static {
    let family = spec.family;
    let p1 = spec.p1;
    let theta = spec.theta();
    let beta = spec.beta();
    move |x: &[f64]| {
        let (z, w) = x.split_at(p1);
        match family {
            Family::A1 => z[0] + z[1] + dot(&theta, w),
            Family::A2 => z[0] + z[1] + dot(&theta, w).powi(2),
            Family::B1 => dot(&beta, z) + dot(&theta, w),
            Family::B2 => z[0] + 2.0 * (w[0] / 2.0).sin(),
            Family::Interaction => w[0] * w[1],
        }
    }
}

/// Draws a dataset for `spec`. Deterministic in `spec.seed`.
pub fn generate(spec: &ScenarioSpec) -> Result<Dataset> {
    spec.validate()?;
    let n = spec.n;
    let x = match spec.family {
        Family::A1 | Family::A2 => gen_ar_normal(n, spec.p1 + spec.p2, spec.rho, rng::derive(spec.seed, 10, 0))?,
        Family::B1 | Family::B2 => {
            let z = gen_ar_normal(n, spec.p1, spec.rho, rng::derive(spec.seed, 10, 1))?;
            let w = gen_ar_normal(n, spec.p2, spec.rho, rng::derive(spec.seed, 10, 2))?;
            hstack(Some(&z), &w)
        }
        Family::Interaction => gen_ar_normal(n, spec.p2, spec.rho, rng::derive(spec.seed, 10, 2))?,
    };
    let eps = normal_vector(n, spec.noise_sd, rng::derive(spec.seed, 10, 3));
    let f = signal(spec);
    let y = (0..n).map(|i| f(x.row(i)) + eps[i]).collect();
    Dataset::from_blocks(y, x, spec.p1)
}

pub fn gen_a1(spec: &ScenarioSpec) -> Result<Dataset> {
    expect_family(spec, Family::A1)?;
    generate(spec)
}

pub fn gen_a2(spec: &ScenarioSpec) -> Result<Dataset> {
    expect_family(spec, Family::A2)?;
    generate(spec)
}

pub fn gen_b1(spec: &ScenarioSpec) -> Result<Dataset> {
    expect_family(spec, Family::B1)?;
    generate(spec)
}

pub fn gen_b2(spec: &ScenarioSpec) -> Result<Dataset> {
    expect_family(spec, Family::B2)?;
    generate(spec)
}

fn expect_family(spec: &ScenarioSpec, family: Family) -> Result<()> {
    if spec.family != family {
        return Err(Error::invalid(format!("expected a {} scenario, got {}", family.name(), spec.family.name())));
    }
    Ok(())
}

/// A-family conditional law of theta'W given Z: mean c * Z_p1 and variance v,
/// since under the joint AR structure W depends on Z only through its last
/// column.
fn a_conditional(spec: &ScenarioSpec) -> (f64, f64) {
    let theta = spec.theta();
    let rho = spec.rho;
    // W_j sits j + 1 steps after Z_p1.
    let c: f64 = theta.iter().enumerate().map(|(j, t)| t * rho.powi(j as i32 + 1)).sum();
    let mut v = 0.0;
    for (i, ti) in theta.iter().enumerate() {
        for (j, tj) in theta.iter().enumerate() {
            let cov = rho.powi((i as i32 - j as i32).abs()) - rho.powi(i as i32 + j as i32 + 2);
            v += ti * tj * cov;
        }
    }
    (c, v)
}

/// theta' Sigma theta for Sigma_ij = rho^|i - j|.
pub fn ar_quadratic_form(theta: &[f64], rho: f64) -> f64 {
    let mut q = 0.0;
    for (i, ti) in theta.iter().enumerate() {
        for (j, tj) in theta.iter().enumerate() {
            q += ti * tj * rho.powi((i as i32 - j as i32).abs());
        }
    }
    q
}

/// E(Y | X) as a fixed regressor on X = (Z, W).
pub fn oracle_m(spec: &ScenarioSpec) -> RegressorSpec {
    RegressorSpec::fixed(signal(spec))
}

/// E(Y | Z) as a fixed regressor on Z.
pub fn oracle_h(spec: &ScenarioSpec) -> RegressorSpec {
    let family = spec.family;
    let beta = spec.beta();
    let p1 = spec.p1;
    let (c, v) = if family.is_a() { a_conditional(spec) } else { (0.0, 0.0) };
    let rho = spec.rho;
    RegressorSpec::fixed(move |z: &[f64]| match family {
        Family::A1 => z[0] + z[1] + c * z[p1 - 1],
        Family::A2 => z[0] + z[1] + (c * z[p1 - 1]).powi(2) + v,
        Family::B1 => dot(&beta, z),
        // E sin(W1 / 2) = 0 by symmetry.
        Family::B2 => z[0],
        Family::Interaction => rho,
    })
}

/// ĥ = Z1 + Z2, the A-family null-regime oracle.
pub fn oracle_h_a_null() -> RegressorSpec {
    RegressorSpec::Fixed(FixedFn::new(|z: &[f64]| z[0] + z[1]))
}

/// Closed-form population r2(Y, W | Z).
pub fn population_r2(spec: &ScenarioSpec) -> Result<f64> {
    spec.validate()?;
    let s2 = spec.noise_sd * spec.noise_sd;
    let explained = match spec.family {
        Family::A1 => a_conditional(spec).1,
        Family::A2 => {
            // theta'W | Z ~ N(mu, v), mu = c Z_p1; Var(s^2 | Z) = 4 mu^2 v + 2 v^2.
            let (c, v) = a_conditional(spec);
            4.0 * c * c * v + 2.0 * v * v
        }
        Family::B1 => ar_quadratic_form(&spec.theta(), spec.rho),
        // 4 E sin^2(W1 / 2) = 2 (1 - E cos W1) = 2 (1 - e^{-1/2}).
        Family::B2 => 2.0 * (1.0 - (-0.5f64).exp()),
        Family::Interaction => 1.0 + spec.rho * spec.rho,
    };
    Ok(explained / (explained + s2))
}

/// How a simulation picks the split ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum XiChoice {
    Fixed(f64),
    /// Permutation calibration on every replicate.
    Adaptive(AdaptiveConfig),
    /// Permutation calibration once, on an independent pilot draw of the
    /// scenario, then reused for all replicates.
    Pilot(AdaptiveConfig),
}

type RunOutcome = (Option<f64>, Option<f64>, f64, Option<f64>);

#[derive(Debug, Clone)]
pub enum TestMethod {
    Pmit {
        cfg: PmitConfig,
        xi: XiChoice,
        /// Number of splits; 1 runs the single-split test.
        splits: usize,
        aggregator: Aggregator,
        gamma_min: f64,
    },
    Cmit {
        spec_m: RegressorSpec,
        xi: XiChoice,
        splits: usize,
        aggregator: Aggregator,
        gamma_min: f64,
    },
}

impl TestMethod {
    pub fn pmit(cfg: PmitConfig, xi: XiChoice) -> Self {
        TestMethod::Pmit {
            cfg,
            xi,
            splits: 1,
            aggregator: Aggregator::Cauchy,
            gamma_min: crate::dist::DEFAULT_GAMMA_MIN,
        }
    }

    pub fn cmit(spec_m: RegressorSpec, xi: XiChoice) -> Self {
        TestMethod::Cmit {
            spec_m,
            xi,
            splits: 1,
            aggregator: Aggregator::Cauchy,
            gamma_min: crate::dist::DEFAULT_GAMMA_MIN,
        }
    }

    pub fn with_splits(mut self, b: usize, agg: Aggregator) -> Self {
        match &mut self {
            TestMethod::Pmit { splits, aggregator, .. } | TestMethod::Cmit { splits, aggregator, .. } => {
                *splits = b;
                *aggregator = agg;
            }
        }
        self
    }

    fn xi_choice(&self) -> &XiChoice {
        match self {
            TestMethod::Pmit { xi, .. } | TestMethod::Cmit { xi, .. } => xi,
        }
    }

    fn calibrate(&self, data: &Dataset, acfg: &AdaptiveConfig, seed: u64) -> Result<AdaptiveXi> {
        match self {
            TestMethod::Pmit { cfg, .. } => pmit::adaptive_xi(data, cfg, acfg, seed),
            TestMethod::Cmit { spec_m, .. } => pmit::cmit_adaptive_xi(data, spec_m, acfg, seed),
        }
    }

    /// (V_n, V_n*, p, p*) for one dataset.
    fn run(&self, data: &Dataset, xi: f64, seed: u64) -> Result<RunOutcome> {
        match self {
            TestMethod::Pmit { cfg, splits, aggregator, gamma_min, .. } => {
                if *splits <= 1 {
                    let r = pmit::pmit_single(data, cfg, xi, seed)?;
                    Ok((Some(r.v_n), Some(r.v_n_star), r.p_value, Some(r.p_value_enhanced)))
                } else {
                    let r = pmit::pmit_multi(data, cfg, xi, *splits, *aggregator, *gamma_min, seed)?;
                    Ok((None, None, r.p_star, Some(r.p_star_enhanced)))
                }
            }
            TestMethod::Cmit { spec_m, splits, aggregator, gamma_min, .. } => {
                if *splits <= 1 {
                    let r = pmit::cmit_single(data, spec_m, xi, seed)?;
                    Ok((Some(r.v), None, r.p_value, None))
                } else {
                    let r = pmit::cmit_multi(data, spec_m, xi, *splits, *aggregator, *gamma_min, seed)?;
                    Ok((None, None, r.p_star, None))
                }
            }
        }
    }
}

/// One simulated test. `statistic` is V_n (or the unconditional v) for
/// single-split runs; multi-split runs only report aggregated p-values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateOutcome {
    pub index: usize,
    pub seed: u64,
    pub xi: f64,
    pub statistic: Option<f64>,
    pub statistic_enhanced: Option<f64>,
    pub p_value: f64,
    pub p_value_enhanced: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Simulation {
    pub scenario: ScenarioSpec,
    pub outcomes: Vec<ReplicateOutcome>,
    /// Pilot calibration, when ξ was chosen once up front.
    pub pilot: Option<AdaptiveXi>,
}

/// Runs `reps` independent replicates of `method` on fresh draws of
/// `scenario`. Replicate r uses dataset seed `rng::replicate(seed, r)`, so
/// results do not depend on the thread count.
pub fn simulate_tests(scenario: &ScenarioSpec, method: &TestMethod, reps: usize, seed: u64) -> Result<Simulation> {
    scenario.validate()?;
    if reps == 0 {
        return Err(Error::invalid("reps must be >= 1"));
    }
    let pilot = match method.xi_choice() {
        XiChoice::Pilot(acfg) => {
            let data = generate(&scenario.clone().with_seed(rng::derive(seed, 5, 0)))?;
            Some(method.calibrate(&data, acfg, rng::derive(seed, 6, 0))?)
        }
        _ => None,
    };
    let outcomes = (0..reps)
        .into_par_iter()
        .map(|r| {
            let ds_seed = rng::replicate(seed, r as u64);
            let data = generate(&scenario.clone().with_seed(ds_seed))?;
            let xi = match method.xi_choice() {
                XiChoice::Fixed(xi) => *xi,
                XiChoice::Pilot(_) => pilot.as_ref().map(|p| p.xi).unwrap_or(0.5),
                XiChoice::Adaptive(acfg) => method.calibrate(&data, acfg, rng::derive(ds_seed, 4, 0))?.xi,
            };
            let (statistic, statistic_enhanced, p_value, p_value_enhanced) =
                method.run(&data, xi, rng::derive(ds_seed, 3, 0))?;
            Ok(ReplicateOutcome {
                index: r,
                seed: ds_seed,
                xi,
                statistic,
                statistic_enhanced,
                p_value,
                p_value_enhanced,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Simulation { scenario: scenario.clone(), outcomes, pilot })
}

/// Rejection rate with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rate {
    pub rate: f64,
    pub se: f64,
    pub reps: usize,
}

impl Rate {
    pub fn from_flags(flags: impl Iterator<Item = bool>) -> Self {
        let (mut hits, mut reps) = (0usize, 0usize);
        for f in flags {
            reps += 1;
            hits += f as usize;
        }
        let rate = if reps == 0 { 0.0 } else { hits as f64 / reps as f64 };
        let se = if reps == 0 { 0.0 } else { (rate * (1.0 - rate) / reps as f64).sqrt() };
        Self { rate, se, reps }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizePower {
    pub alpha: f64,
    pub plain: Rate,
    /// Rate for the power-enhanced statistic, when the method has one.
    pub enhanced: Option<Rate>,
    pub simulation: Simulation,
}

/// Fraction of replicates with p < alpha.
pub fn run_size_power(
    scenario: &ScenarioSpec,
    method: &TestMethod,
    reps: usize,
    alpha: f64,
    seed: u64,
) -> Result<SizePower> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let simulation = simulate_tests(scenario, method, reps, seed)?;
    let plain = Rate::from_flags(simulation.outcomes.iter().map(|o| o.p_value < alpha));
    let enhanced = simulation
        .outcomes
        .iter()
        .map(|o| o.p_value_enhanced.map(|p| p < alpha))
        .collect::<Option<Vec<_>>>()
        .map(|f| Rate::from_flags(f.into_iter()));
    Ok(SizePower { alpha, plain, enhanced, simulation })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coverage {
    pub r2_true: f64,
    /// Share of intervals containing `r2_true`.
    pub cp: f64,
    pub cp_se: f64,
    /// Mean interval length.
    pub al: f64,
    pub mean_r2_hat: f64,
    pub mean_abs_error: f64,
    pub reps: usize,
    pub estimates: Vec<PgmcEstimate>,
}

/// Repeated pGMC estimation against the closed-form population value.
/// `keep` turns on per-half distance-correlation screening.
pub fn run_coverage(
    scenario: &ScenarioSpec,
    spec_m: &RegressorSpec,
    spec_h: &RegressorSpec,
    keep: Option<usize>,
    reps: usize,
    alpha: f64,
    seed: u64,
) -> Result<Coverage> {
    let r2_true = population_r2(scenario)?;
    if reps == 0 {
        return Err(Error::invalid("reps must be >= 1"));
    }
    let estimates = (0..reps)
        .into_par_iter()
        .map(|r| {
            let ds_seed = rng::replicate(seed, r as u64);
            let data = generate(&scenario.clone().with_seed(ds_seed))?;
            let split_seed = rng::derive(ds_seed, 3, 0);
            match keep {
                Some(k) => pgmc::pgmc_with_screening(&data, k, spec_m, spec_h, alpha, split_seed),
                None => pgmc::pgmc_estimate(&data, spec_m, spec_h, alpha, split_seed),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let n = reps as f64;
    let covered = Rate::from_flags(estimates.iter().map(|e| e.covers(r2_true)));
    Ok(Coverage {
        r2_true,
        cp: covered.rate,
        cp_se: covered.se,
        al: estimates.iter().map(PgmcEstimate::ci_length).sum::<f64>() / n,
        mean_r2_hat: estimates.iter().map(|e| e.r2_hat).sum::<f64>() / n,
        mean_abs_error: estimates.iter().map(|e| (e.r2_hat - r2_true).abs()).sum::<f64>() / n,
        reps,
        estimates,
    })
}

/// The null-regime A1 scenario with the oracle h and GBT g, as used for the
/// chi-square calibration check.
pub fn a1_null_oracle_method(xi: XiChoice) -> TestMethod {
    TestMethod::pmit(PmitConfig::new(oracle_h_a_null(), RegressorSpec::gbt()), xi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corr(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
        let cov = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>();
        let va = a.iter().map(|x| (x - ma).powi(2)).sum::<f64>();
        let vb = b.iter().map(|y| (y - mb).powi(2)).sum::<f64>();
        cov / (va * vb).sqrt()
    }

    #[test]
    fn ar_block_moments() {
        let m = gen_ar_normal(100_000, 3, 0.3, 4).unwrap();
        let (c0, c2) = (m.column(0), m.column(2));
        assert!((corr(&c0, &c2) - 0.09).abs() < 0.01);
        let var = c2.iter().map(|v| v * v).sum::<f64>() / c2.len() as f64;
        assert!((var - 1.0).abs() < 0.02);
        let ind = gen_ar_normal(10_000, 2, 0.0, 9).unwrap();
        assert!(corr(&ind.column(0), &ind.column(1)).abs() < 0.05);
        assert!(gen_ar_normal(5, 0, 0.3, 1).is_err());
        assert!(gen_ar_normal(5, 2, 1.0, 1).is_err());
    }

    #[test]
    fn theta_norms() {
        for fam in [Family::A1, Family::A2] {
            for reg in [Regime::Sparse, Regime::Dense] {
                let t = ScenarioSpec::new(fam, reg, 10, 0).theta();
                let sq: f64 = t.iter().map(|v| v * v).sum();
                assert!((sq - 0.5).abs() < 1e-12, "{fam:?} {reg:?}");
            }
        }
        let a2 = ScenarioSpec::new(Family::A2, Regime::Dense, 10, 0).theta();
        assert_eq!(a2.iter().filter(|v| **v != 0.0).count(), 12);
        let a2 = ScenarioSpec::new(Family::A2, Regime::Sparse, 10, 0).theta();
        assert!((a2[0] - 1.0 / 10f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn null_families_coincide() {
        let a1 = generate(&ScenarioSpec::new(Family::A1, Regime::Null, 50, 3)).unwrap();
        let a2 = generate(&ScenarioSpec::new(Family::A2, Regime::Null, 50, 3)).unwrap();
        assert_eq!(a1, a2);
    }

    #[test]
    fn null_residual_variance() {
        let d = generate(&ScenarioSpec::new(Family::A1, Regime::Null, 10_000, 8)).unwrap();
        let r: Vec<f64> = (0..d.n()).map(|i| d.y()[i] - d.x().get(i, 0) - d.x().get(i, 1)).collect();
        let mean = r.iter().sum::<f64>() / r.len() as f64;
        let var = r.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / r.len() as f64;
        assert!((var - 0.25).abs() < 0.02);
    }

    #[test]
    fn b_dimensions_and_validation() {
        let s = ScenarioSpec::new(Family::B1, Regime::Null, 30, 1).with_p(21);
        assert_eq!((s.p1, s.p2), (10, 11));
        let d = generate(&s).unwrap();
        assert_eq!((d.p1(), d.p2()), (10, 11));
        assert!(generate(&ScenarioSpec::new(Family::B1, Regime::Null, 30, 1).with_p(4)).is_err());
        assert!(gen_b2(&ScenarioSpec::new(Family::B1, Regime::Null, 30, 1)).is_err());
    }

    #[test]
    fn population_values() {
        let b2 = population_r2(&ScenarioSpec::new(Family::B2, Regime::Null, 10, 0)).unwrap();
        let a = 2.0 * (1.0 - (-0.5f64).exp());
        assert!((b2 - a / (a + 1.0)).abs() < 1e-15);
        let b1 = population_r2(&ScenarioSpec::new(Family::B1, Regime::Null, 10, 0)).unwrap();
        assert!((b1 - (5.5 / 3.0) / (5.5 / 3.0 + 1.0)).abs() < 1e-12);
        let a_null = population_r2(&ScenarioSpec::new(Family::A1, Regime::Null, 10, 0)).unwrap();
        assert_eq!(a_null, 0.0);
    }

    #[test]
    fn oracle_h_matches_conditional_mean_on_average() {
        // Residual Y - h(Z) must be uncorrelated with Z_p1 in the A1 sparse
        // scenario, where W leaks into E(Y | Z) through the last Z column.
        let s = ScenarioSpec::new(Family::A1, Regime::Dense, 50_000, 2);
        let d = generate(&s).unwrap();
        let h = crate::regress::fit(&oracle_h(&s), &Matrix::zeros(0, s.p1), &[]).unwrap();
        let z = d.z_rows(&(0..d.n()).collect::<Vec<_>>());
        let resid: Vec<f64> = (0..d.n()).map(|i| d.y()[i] - h.predict(z.row(i))).collect();
        assert!(corr(&resid, &z.column(s.p1 - 1)).abs() < 0.02);
    }

    #[test]
    fn rate_standard_error() {
        let r = Rate::from_flags([true, false, false, false].into_iter());
        assert_eq!(r.rate, 0.25);
        assert!((r.se - (0.25f64 * 0.75 / 4.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn simulation_is_deterministic() {
        let s = ScenarioSpec::new(Family::A1, Regime::Null, 60, 0);
        let method =
            TestMethod::pmit(PmitConfig::new(oracle_h_a_null(), RegressorSpec::linear()), XiChoice::Fixed(0.5));
        let a = run_size_power(&s, &method, 8, 0.05, 11).unwrap();
        let b = run_size_power(&s, &method, 8, 0.05, 11).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.simulation.outcomes.len(), 8);
    }
}
