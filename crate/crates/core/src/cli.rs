//! Command-line front end.
//!
//! Every command writes one JSON record (schema `pmdep/1`) to `--output` or
//! stdout and a short human summary to stderr. `simulate` writes its table
//! as CSV to stdout (or `--csv`) and the JSON log to `--output`.
//!
//! A `--config` TOML file may supply any long flag of the chosen command
//! (`xi = 0.8`, `w = ["w1", "w2"]`, `adaptive = true`); flags given on the
//! command line win.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use crate::dataset::{load_csv, Dataset, RoleSpec};
use crate::dist::{Aggregator, DEFAULT_GAMMA_MIN};
use crate::error::Error;
use crate::pgmc;
use crate::pmit::{self, AdaptiveConfig, AdaptiveMode, GRecipe, PmitConfig};
use crate::regress::{LearnerConfig, RegressorSpec};
use crate::sim::{self, Family, Regime, ScenarioSpec, TestMethod, XiChoice};

pub const SCHEMA: &str = "pmdep/1";

pub const EXIT_OK: i32 = 0;
pub const EXIT_OTHER: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_DEGENERATE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "pmdep", version, about = "Partial mean independence tests and partial GMC estimation")]
pub struct Cli {
    /// Worker threads for multi-split, adaptive and simulation runs.
    #[arg(long, global = true, env = "PMDEP_THREADS", default_value_t = 1)]
    pub threads: usize,

    /// TOML file with default values for the command's flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Write the JSON record here instead of stdout.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,

    /// Suppress the summary on stderr.
    #[arg(long, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Test E(Y | Z, W) = E(Y | Z) on a CSV file.
    #[command(args_override_self = true)]
    TestPmit(PmitArgs),
    /// Test E(Y | W) = E(Y) on a CSV file (no control block).
    #[command(args_override_self = true)]
    TestCmit(CmitArgs),
    /// Estimate the partial GMC r2(Y, W | Z) with a confidence interval.
    #[command(args_override_self = true)]
    Pgmc(PgmcArgs),
    /// Monte Carlo size, power or coverage study on a built-in scenario.
    #[command(args_override_self = true)]
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// CSV file with a header row.
    #[arg(long)]
    pub input: PathBuf,
    /// Response column.
    #[arg(long)]
    pub response: String,
    /// Control columns: comma list, `a..b` header ranges allowed.
    #[arg(long, value_delimiter = ',')]
    pub z: Vec<String>,
    /// Tested columns: comma list, `a..b` header ranges allowed.
    #[arg(long, value_delimiter = ',', required = true)]
    pub w: Vec<String>,
    /// Standardize every covariate column before fitting.
    #[arg(long)]
    pub zscore: bool,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    /// Fixed split ratio |D1| / N.
    #[arg(long, conflicts_with = "adaptive")]
    pub xi: Option<f64>,
    /// Choose the split ratio by permutation calibration (the default when
    /// --xi is absent).
    #[arg(long)]
    pub adaptive: bool,
    /// Permutation replicates per candidate ratio.
    #[arg(long = "M", default_value_t = 200)]
    pub m: usize,
    /// Candidate ratios, ascending (default 1/2, 2/3, ..., 9/10).
    #[arg(long, value_delimiter = ',')]
    pub candidates: Vec<f64>,
    /// Calibrate with one h fit reused across permutations.
    #[arg(long)]
    pub fast_adaptive: bool,
    /// Number of random splits aggregated.
    #[arg(long = "B", default_value_t = 10)]
    pub b: usize,
    #[arg(long, default_value = "cauchy")]
    pub aggregator: Aggregator,
    #[arg(long, default_value_t = DEFAULT_GAMMA_MIN)]
    pub gamma_min: f64,
}

#[derive(Debug, Args)]
pub struct PmitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub split: SplitArgs,
    /// Learner for every role, e.g. `gbt:eta=0.1,nrounds=200` or `linear`.
    #[arg(long, default_value = "gbt")]
    pub regressor: LearnerConfig,
    #[arg(long)]
    pub h_regressor: Option<LearnerConfig>,
    #[arg(long)]
    pub g_regressor: Option<LearnerConfig>,
    /// How g is estimated: `residual` or `difference`.
    #[arg(long, default_value = "residual")]
    pub recipe: GRecipe,
    /// Weight of the power-enhancement term.
    #[arg(long, default_value_t = 1.0)]
    pub tau: f64,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct CmitArgs {
    /// CSV file with a header row.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub response: String,
    /// Covariate columns: comma list, `a..b` header ranges allowed.
    #[arg(long, value_delimiter = ',', required = true)]
    pub w: Vec<String>,
    #[arg(long)]
    pub zscore: bool,
    #[command(flatten)]
    pub split: SplitArgs,
    #[arg(long, default_value = "gbt")]
    pub regressor: LearnerConfig,
    #[arg(long)]
    pub m_regressor: Option<LearnerConfig>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct PgmcArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value = "gbt")]
    pub regressor: LearnerConfig,
    #[arg(long)]
    pub m_regressor: Option<LearnerConfig>,
    #[arg(long)]
    pub h_regressor: Option<LearnerConfig>,
    /// Interval level is 1 - alpha.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Keep only this many covariates per training half, ranked by
    /// distance correlation with Y.
    #[arg(long)]
    pub keep: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// a1, a2, b1, b2 or interaction.
    #[arg(long)]
    pub scenario: Family,
    /// null, sparse or dense (A family).
    #[arg(long, default_value = "null")]
    pub regime: Regime,
    #[arg(long = "N")]
    pub n: usize,
    /// Total covariate dimension, split floor(p/2) into Z and the rest into W.
    #[arg(long, conflicts_with_all = ["p1", "p2"])]
    pub p: Option<usize>,
    #[arg(long)]
    pub p1: Option<usize>,
    #[arg(long)]
    pub p2: Option<usize>,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub noise_sd: Option<f64>,
    #[arg(long, default_value_t = 200)]
    pub reps: usize,
    /// pmit, cmit or pgmc (default: pgmc for b1/b2, cmit for interaction,
    /// pmit otherwise).
    #[arg(long)]
    pub method: Option<String>,
    /// Use the scenario's true conditional means instead of learned ones
    /// (h only for pmit; m and h for pgmc).
    #[arg(long)]
    pub oracle: bool,
    #[command(flatten)]
    pub split: SplitArgs,
    /// Calibrate the split ratio on every replicate rather than once on a
    /// pilot draw.
    #[arg(long, requires = "adaptive")]
    pub adaptive_each: bool,
    #[arg(long, default_value = "gbt")]
    pub regressor: LearnerConfig,
    #[arg(long)]
    pub h_regressor: Option<LearnerConfig>,
    #[arg(long)]
    pub g_regressor: Option<LearnerConfig>,
    #[arg(long)]
    pub m_regressor: Option<LearnerConfig>,
    #[arg(long, default_value = "residual")]
    pub recipe: GRecipe,
    #[arg(long, default_value_t = 1.0)]
    pub tau: f64,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long)]
    pub keep: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write the CSV table here instead of stdout.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

/// Errors surfaced by the front end, each with its exit status.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Lib(Error),
    Output(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => EXIT_INPUT,
            Failure::Lib(e) if e.is_degenerate() => EXIT_DEGENERATE,
            Failure::Lib(_) => EXIT_INPUT,
            Failure::Output(_) => EXIT_OTHER,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(m) | Failure::Output(m) => f.write_str(m),
            Failure::Lib(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

/// Parses `args` (program name first), runs the command and returns the
/// process exit status.
pub fn main_with_args(args: Vec<OsString>) -> i32 {
    let args = match with_config_defaults(args) {
        Ok(a) => a,
        Err(f) => {
            eprintln!("error: {f}");
            return f.exit_code();
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("error: {f}");
            f.exit_code()
        }
    }
}

/// Splices flags from `--config FILE` in front of the user's own flags for
/// the same subcommand, so explicit flags override the file.
fn with_config_defaults(args: Vec<OsString>) -> CliResult<Vec<OsString>> {
    let pos = args.iter().position(|a| a == "--config");
    let path = match pos.and_then(|i| args.get(i + 1)) {
        Some(p) => PathBuf::from(p),
        None => {
            if let Some(a) = args.iter().find_map(|a| a.to_str().and_then(|s| s.strip_prefix("--config="))) {
                PathBuf::from(a)
            } else {
                return Ok(args);
            }
        }
    };
    let text = std::fs::read_to_string(&path)
        .map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let table: toml::Table =
        text.parse().map_err(|e| Failure::Usage(format!("invalid config {}: {e}", path.display())))?;
    let commands = ["test-pmit", "test-cmit", "pgmc", "simulate"];
    let Some(cmd_at) = args.iter().position(|a| commands.iter().any(|c| a == c)) else {
        return Ok(args);
    };
    let mut injected = Vec::new();
    for (key, value) in &table {
        let flag = format!("--{}", key.replace('_', "-"));
        match value {
            toml::Value::Boolean(true) => injected.push(OsString::from(flag)),
            toml::Value::Boolean(false) => {}
            toml::Value::Array(items) => {
                let joined = items.iter().map(scalar_text).collect::<CliResult<Vec<_>>>()?.join(",");
                injected.push(OsString::from(flag));
                injected.push(OsString::from(joined));
            }
            toml::Value::Table(t) => {
                // Learner tables: {kind = "gbt", eta = 0.1}.
                let cfg: LearnerConfig = toml::Value::Table(t.clone())
                    .try_into()
                    .map_err(|e| Failure::Usage(format!("config key {key}: {e}")))?;
                injected.push(OsString::from(flag));
                injected.push(OsString::from(learner_string(&cfg)));
            }
            other => {
                injected.push(OsString::from(flag));
                injected.push(OsString::from(scalar_text(other)?));
            }
        }
    }
    let mut out = args[..=cmd_at].to_vec();
    out.extend(injected);
    out.extend_from_slice(&args[cmd_at + 1..]);
    Ok(out)
}

fn scalar_text(v: &toml::Value) -> CliResult<String> {
    match v {
        toml::Value::String(s) => Ok(s.clone()),
        toml::Value::Integer(i) => Ok(i.to_string()),
        toml::Value::Float(f) => Ok(f.to_string()),
        toml::Value::Boolean(b) => Ok(b.to_string()),
        other => Err(Failure::Usage(format!("unsupported config value {other}"))),
    }
}

fn learner_string(c: &LearnerConfig) -> String {
    match c {
        LearnerConfig::Linear { ridge_lambda: None } => "linear".into(),
        LearnerConfig::Linear { ridge_lambda: Some(l) } => format!("linear:lambda={l}"),
        LearnerConfig::Knn { k } => format!("knn:k={k}"),
        LearnerConfig::Gbt { eta, nrounds, max_depth, min_leaf } => {
            format!("gbt:eta={eta},nrounds={nrounds},max_depth={max_depth},min_leaf={min_leaf}")
        }
    }
}

pub fn run(cli: &Cli) -> CliResult<()> {
    if cli.threads == 0 {
        return Err(Failure::Usage("--threads must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
        .map_err(|e| Failure::Output(format!("cannot start worker pool: {e}")))?;
    pool.install(|| match &cli.command {
        Command::TestPmit(a) => run_pmit(cli, a),
        Command::TestCmit(a) => run_cmit(cli, a),
        Command::Pgmc(a) => run_pgmc(cli, a),
        Command::Simulate(a) => run_simulate(cli, a),
    })
}

/// Expands `a..b` tokens into the header columns from `a` to `b` inclusive,
/// in file order.
pub fn expand_columns(header: &[String], tokens: &[String]) -> Result<Vec<String>, Error> {
    let mut out = Vec::new();
    for tok in tokens.iter().map(|t| t.trim()).filter(|t| !t.is_empty()) {
        match tok.split_once("..") {
            Some((a, b)) => {
                let find = |name: &str| {
                    header
                        .iter()
                        .position(|h| h == name.trim())
                        .ok_or_else(|| Error::UnknownColumn(name.trim().to_string()))
                };
                let (i, j) = (find(a)?, find(b)?);
                if j < i {
                    return Err(Error::invalid(format!("empty column range \"{tok}\"")));
                }
                out.extend(header[i..=j].iter().cloned());
            }
            None => out.push(tok.to_string()),
        }
    }
    Ok(out)
}

fn read_header(path: &Path) -> Result<Vec<String>, Error> {
    let file = std::fs::File::open(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    Ok(rdr.headers()?.iter().map(|h| h.trim().to_string()).collect())
}

fn load(input: &Path, response: &str, z: &[String], w: &[String], zscore: bool) -> Result<Dataset, Error> {
    let header = read_header(input)?;
    let roles =
        RoleSpec { response: response.to_string(), z: expand_columns(&header, z)?, w: expand_columns(&header, w)? };
    let data = load_csv(input, &roles)?;
    Ok(if zscore { data.standardized() } else { data })
}

fn adaptive_config(s: &SplitArgs, alpha: f64) -> AdaptiveConfig {
    let mut cfg = AdaptiveConfig {
        m: s.m,
        alpha,
        mode: if s.fast_adaptive { AdaptiveMode::ReuseH } else { AdaptiveMode::Refit },
        ..AdaptiveConfig::default()
    };
    if !s.candidates.is_empty() {
        cfg.candidates = s.candidates.clone();
    }
    cfg
}

fn check_alpha(alpha: f64) -> CliResult<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Failure::Usage(format!("--alpha must lie in (0, 1), got {alpha}")))
    }
}

fn data_json(input: &Path, data: &Dataset, zscore: bool) -> Value {
    let names = data.names();
    json!({
        "path": input.display().to_string(),
        "n": data.n(),
        "response": data.response_name(),
        "z": data.z_cols().iter().map(|&c| &names[c]).collect::<Vec<_>>(),
        "w": data.w_cols().iter().map(|&c| &names[c]).collect::<Vec<_>>(),
        "zscore": zscore,
    })
}

fn record(command: &str, input: Value, settings: Value, result: impl Serialize) -> CliResult<Value> {
    let result = serde_json::to_value(result).map_err(|e| Failure::Output(e.to_string()))?;
    Ok(json!({
        "schema": SCHEMA,
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "input": input,
        "settings": settings,
        "result": result,
    }))
}

fn emit_json(cli: &Cli, value: &Value) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Failure::Output(e.to_string()))?;
    text.push('\n');
    write_text(cli.output.as_deref(), &text)
}

fn write_text(path: Option<&Path>, text: &str) -> CliResult<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure::Output(format!("cannot write {}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| Failure::Output(format!("cannot write to stdout: {e}")))
        }
    }
}

fn summary(cli: &Cli, lines: &[String]) {
    if !cli.quiet {
        for l in lines {
            eprintln!("{l}");
        }
    }
}

fn run_pmit(cli: &Cli, a: &PmitArgs) -> CliResult<()> {
    check_alpha(a.alpha)?;
    let data = load(&a.data.input, &a.data.response, &a.data.z, &a.data.w, a.data.zscore)?;
    let h_cfg = a.h_regressor.clone().unwrap_or_else(|| a.regressor.clone());
    let g_cfg = a.g_regressor.clone().unwrap_or_else(|| a.regressor.clone());
    let cfg =
        PmitConfig::new(RegressorSpec::from(&h_cfg), RegressorSpec::from(&g_cfg)).with_tau(a.tau).with_recipe(a.recipe);
    let (xi, adaptive) = match a.split.xi {
        Some(xi) => (xi, None),
        None => {
            let acfg = adaptive_config(&a.split, a.alpha);
            let ad = pmit::adaptive_xi(&data, &cfg, &acfg, a.seed)?;
            (ad.xi, Some(ad))
        }
    };
    let multi = pmit::pmit_multi(&data, &cfg, xi, a.split.b, a.split.aggregator, a.split.gamma_min, a.seed)?;
    let settings = json!({
        "h_regressor": h_cfg,
        "g_regressor": g_cfg,
        "recipe": a.recipe,
        "tau": a.tau,
        "alpha": a.alpha,
        "xi": a.split.xi,
        "adaptive": a.split.xi.is_none(),
        "M": a.split.m,
        "fast_adaptive": a.split.fast_adaptive,
        "B": a.split.b,
        "aggregator": a.split.aggregator,
        "gamma_min": a.split.gamma_min,
        "seed": a.seed,
    });
    let result = json!({
        "xi": xi,
        "adaptive": adaptive,
        "p_star": multi.p_star,
        "p_star_enhanced": multi.p_star_enhanced,
        "reject": multi.rejects(a.alpha),
        "reject_enhanced": multi.rejects_enhanced(a.alpha),
        "runs": multi.runs,
    });
    emit_json(cli, &record("test-pmit", data_json(&a.data.input, &data, a.data.zscore), settings, result)?)?;
    let mut lines = vec![format!(
        "pMIT: N = {}, p1 = {}, p2 = {}, xi = {xi:.4}, B = {}",
        data.n(),
        data.p1(),
        data.p2(),
        a.split.b
    )];
    if let Some(ad) = &adaptive {
        if !ad.qualified {
            lines.push(format!(
                "warning: no candidate ratio kept the permutation error at {}; using the largest",
                a.alpha
            ));
        }
    }
    lines.push(format!(
        "p* = {:.6} ({}), enhanced p* = {:.6} ({})",
        multi.p_star,
        verdict(multi.rejects(a.alpha)),
        multi.p_star_enhanced,
        verdict(multi.rejects_enhanced(a.alpha))
    ));
    summary(cli, &lines);
    Ok(())
}

fn verdict(reject: bool) -> &'static str {
    if reject {
        "reject"
    } else {
        "do not reject"
    }
}

fn run_cmit(cli: &Cli, a: &CmitArgs) -> CliResult<()> {
    check_alpha(a.alpha)?;
    let data = load(&a.input, &a.response, &[], &a.w, a.zscore)?;
    let m_cfg = a.m_regressor.clone().unwrap_or_else(|| a.regressor.clone());
    let spec_m = RegressorSpec::from(&m_cfg);
    let (xi, adaptive) = match a.split.xi {
        Some(xi) => (xi, None),
        None => {
            let acfg = adaptive_config(&a.split, a.alpha);
            let ad = pmit::cmit_adaptive_xi(&data, &spec_m, &acfg, a.seed)?;
            (ad.xi, Some(ad))
        }
    };
    let multi = pmit::cmit_multi(&data, &spec_m, xi, a.split.b, a.split.aggregator, a.split.gamma_min, a.seed)?;
    let settings = json!({
        "m_regressor": m_cfg,
        "alpha": a.alpha,
        "xi": a.split.xi,
        "adaptive": a.split.xi.is_none(),
        "M": a.split.m,
        "B": a.split.b,
        "aggregator": a.split.aggregator,
        "gamma_min": a.split.gamma_min,
        "seed": a.seed,
    });
    let reject = multi.p_star < a.alpha;
    let result = json!({
        "xi": xi,
        "adaptive": adaptive,
        "p_star": multi.p_star,
        "reject": reject,
        "runs": multi.runs,
    });
    emit_json(cli, &record("test-cmit", data_json(&a.input, &data, a.zscore), settings, result)?)?;
    summary(
        cli,
        &[
            format!("CMIT: N = {}, p = {}, xi = {xi:.4}, B = {}", data.n(), data.p(), a.split.b),
            format!("p* = {:.6} ({})", multi.p_star, verdict(reject)),
        ],
    );
    Ok(())
}

fn run_pgmc(cli: &Cli, a: &PgmcArgs) -> CliResult<()> {
    check_alpha(a.alpha)?;
    let data = load(&a.data.input, &a.data.response, &a.data.z, &a.data.w, a.data.zscore)?;
    let m_cfg = a.m_regressor.clone().unwrap_or_else(|| a.regressor.clone());
    let h_cfg = a.h_regressor.clone().unwrap_or_else(|| a.regressor.clone());
    let (spec_m, spec_h) = (RegressorSpec::from(&m_cfg), RegressorSpec::from(&h_cfg));
    let est = match a.keep {
        Some(k) => pgmc::pgmc_with_screening(&data, k, &spec_m, &spec_h, a.alpha, a.seed)?,
        None => pgmc::pgmc_estimate(&data, &spec_m, &spec_h, a.alpha, a.seed)?,
    };
    let settings = json!({
        "m_regressor": m_cfg,
        "h_regressor": h_cfg,
        "alpha": a.alpha,
        "keep": a.keep,
        "seed": a.seed,
    });
    emit_json(cli, &record("pgmc", data_json(&a.data.input, &data, a.data.zscore), settings, &est)?)?;
    summary(
        cli,
        &[
            format!("pGMC: N = {}, p1 = {}, p2 = {}", data.n(), data.p1(), data.p2()),
            format!(
                "r2 = {:.6}, {:.0}% CI [{:.6}, {:.6}] (truncated [{:.6}, {:.6}])",
                est.r2_hat,
                100.0 * (1.0 - a.alpha),
                est.ci_low,
                est.ci_high,
                est.ci_low_truncated,
                est.ci_high_truncated
            ),
        ],
    );
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SimMethod {
    Pmit,
    Cmit,
    Pgmc,
}

fn run_simulate(cli: &Cli, a: &SimulateArgs) -> CliResult<()> {
    check_alpha(a.alpha)?;
    let mut scenario = ScenarioSpec::new(a.scenario, a.regime, a.n, a.seed);
    if let Some(p) = a.p {
        scenario = scenario.with_p(p);
    }
    if let Some(p1) = a.p1 {
        scenario.p1 = p1;
    }
    if let Some(p2) = a.p2 {
        scenario.p2 = p2;
    }
    if let Some(rho) = a.rho {
        scenario.rho = rho;
    }
    if let Some(sd) = a.noise_sd {
        scenario.noise_sd = sd;
    }
    scenario.validate()?;
    let method = match a.method.as_deref().map(str::to_ascii_lowercase).as_deref() {
        Some("pmit") => SimMethod::Pmit,
        Some("cmit") => SimMethod::Cmit,
        Some("pgmc") => SimMethod::Pgmc,
        Some(other) => return Err(Failure::Usage(format!("unknown method \"{other}\""))),
        None => match a.scenario {
            Family::B1 | Family::B2 => SimMethod::Pgmc,
            Family::Interaction => SimMethod::Cmit,
            Family::A1 | Family::A2 => SimMethod::Pmit,
        },
    };
    let learner = |c: &Option<LearnerConfig>| c.clone().unwrap_or_else(|| a.regressor.clone());
    let (h_cfg, g_cfg, m_cfg) = (learner(&a.h_regressor), learner(&a.g_regressor), learner(&a.m_regressor));
    let xi_choice = match a.split.xi {
        Some(xi) => XiChoice::Fixed(xi),
        None if a.adaptive_each => XiChoice::Adaptive(adaptive_config(&a.split, a.alpha)),
        None => XiChoice::Pilot(adaptive_config(&a.split, a.alpha)),
    };
    let mut settings = json!({
        "method": format!("{method:?}").to_ascii_lowercase(),
        "reps": a.reps,
        "alpha": a.alpha,
        "oracle": a.oracle,
        "seed": a.seed,
    });

    let header: Vec<&str>;
    let row: Vec<String>;
    let result: Value;
    match method {
        SimMethod::Pgmc => {
            let (spec_m, spec_h) = if a.oracle {
                (sim::oracle_m(&scenario), sim::oracle_h(&scenario))
            } else {
                (RegressorSpec::from(&m_cfg), RegressorSpec::from(&h_cfg))
            };
            settings["m_regressor"] = if a.oracle { json!("oracle") } else { json!(m_cfg) };
            settings["h_regressor"] = if a.oracle { json!("oracle") } else { json!(h_cfg) };
            settings["keep"] = json!(a.keep);
            let cov = sim::run_coverage(&scenario, &spec_m, &spec_h, a.keep, a.reps, a.alpha, a.seed)?;
            header = vec![
                "scenario",
                "N",
                "p1",
                "p2",
                "n1",
                "reps",
                "alpha",
                "r2_true",
                "cp",
                "cp_se",
                "al",
                "mean_r2_hat",
                "mean_abs_error",
            ];
            row = vec![
                scenario.family.name().into(),
                scenario.n.to_string(),
                scenario.p1.to_string(),
                scenario.p2.to_string(),
                scenario.n.div_ceil(2).to_string(),
                a.reps.to_string(),
                a.alpha.to_string(),
                cov.r2_true.to_string(),
                cov.cp.to_string(),
                cov.cp_se.to_string(),
                cov.al.to_string(),
                cov.mean_r2_hat.to_string(),
                cov.mean_abs_error.to_string(),
            ];
            summary(
                cli,
                &[format!(
                    "coverage: r2 = {:.4}, CP = {:.3} (se {:.3}), AL = {:.4}, mean |err| = {:.4}",
                    cov.r2_true, cov.cp, cov.cp_se, cov.al, cov.mean_abs_error
                )],
            );
            result = serde_json::to_value(&cov).map_err(|e| Failure::Output(e.to_string()))?;
        }
        SimMethod::Pmit | SimMethod::Cmit => {
            let test = if method == SimMethod::Pmit {
                let spec_h = if a.oracle { sim::oracle_h(&scenario) } else { RegressorSpec::from(&h_cfg) };
                settings["h_regressor"] = if a.oracle { json!("oracle") } else { json!(h_cfg) };
                settings["g_regressor"] = json!(g_cfg);
                settings["recipe"] = json!(a.recipe);
                settings["tau"] = json!(a.tau);
                let cfg = PmitConfig::new(spec_h, RegressorSpec::from(&g_cfg)).with_tau(a.tau).with_recipe(a.recipe);
                TestMethod::pmit(cfg, xi_choice.clone())
            } else {
                let spec_m = if a.oracle { sim::oracle_m(&scenario) } else { RegressorSpec::from(&m_cfg) };
                settings["m_regressor"] = if a.oracle { json!("oracle") } else { json!(m_cfg) };
                TestMethod::cmit(spec_m, xi_choice.clone())
            }
            .with_splits(a.split.b, a.split.aggregator);
            settings["xi"] = json!(xi_choice);
            settings["B"] = json!(a.split.b);
            settings["aggregator"] = json!(a.split.aggregator);
            let sp = sim::run_size_power(&scenario, &test, a.reps, a.alpha, a.seed)?;
            let xi_text = match (&xi_choice, &sp.simulation.pilot) {
                (XiChoice::Fixed(x), _) => x.to_string(),
                (_, Some(p)) => p.xi.to_string(),
                _ => "adaptive".into(),
            };
            header = vec![
                "scenario",
                "regime",
                "N",
                "p1",
                "p2",
                "method",
                "xi",
                "B",
                "reps",
                "alpha",
                "rate",
                "se",
                "rate_enhanced",
                "se_enhanced",
            ];
            let (re, se) = match sp.enhanced {
                Some(r) => (r.rate.to_string(), r.se.to_string()),
                None => (String::new(), String::new()),
            };
            row = vec![
                scenario.family.name().into(),
                scenario.regime.name().into(),
                scenario.n.to_string(),
                scenario.p1.to_string(),
                scenario.p2.to_string(),
                format!("{method:?}").to_ascii_lowercase(),
                xi_text,
                a.split.b.to_string(),
                a.reps.to_string(),
                a.alpha.to_string(),
                sp.plain.rate.to_string(),
                sp.plain.se.to_string(),
                re,
                se,
            ];
            summary(
                cli,
                &[format!(
                    "rejection rate {:.4} (se {:.4}) over {} replicates",
                    sp.plain.rate, sp.plain.se, sp.plain.reps
                )],
            );
            result = serde_json::to_value(&sp).map_err(|e| Failure::Output(e.to_string()))?;
        }
    }

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&header).map_err(|e| Failure::Output(e.to_string()))?;
    w.write_record(&row).map_err(|e| Failure::Output(e.to_string()))?;
    let bytes = w.into_inner().map_err(|e| Failure::Output(e.to_string()))?;
    let table = String::from_utf8(bytes).map_err(|e| Failure::Output(e.to_string()))?;
    write_text(a.csv.as_deref(), &table)?;

    let log = record(
        "simulate",
        serde_json::to_value(&scenario).map_err(|e| Failure::Output(e.to_string()))?,
        settings,
        result,
    )?;
    if cli.output.is_some() {
        emit_json(cli, &log)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header() -> Vec<String> {
        ["y", "z1", "z2", "w1", "w2", "w3", "w10"].iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn ranges_follow_header_order() {
        let got = expand_columns(&header(), &["w1..w3".into()]).unwrap();
        assert_eq!(got, vec!["w1", "w2", "w3"]);
        let got = expand_columns(&header(), &["z2".into(), "w2..w10".into()]).unwrap();
        assert_eq!(got, vec!["z2", "w2", "w3", "w10"]);
        assert!(matches!(expand_columns(&header(), &["w1..w9".into()]), Err(Error::UnknownColumn(_))));
        assert!(expand_columns(&header(), &["w3..w1".into()]).is_err());
    }

    #[test]
    fn xi_and_adaptive_conflict() {
        let r = Cli::try_parse_from([
            "pmdep",
            "test-pmit",
            "--input",
            "d.csv",
            "--response",
            "y",
            "--w",
            "w1",
            "--xi",
            "0.8",
            "--adaptive",
        ]);
        assert!(r.is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(Failure::Usage("x".into()).exit_code(), EXIT_INPUT);
        assert_eq!(Failure::Lib(Error::Degenerate("x".into())).exit_code(), EXIT_DEGENERATE);
        assert_eq!(Failure::Lib(Error::UnknownColumn("x".into())).exit_code(), EXIT_INPUT);
        assert_eq!(Failure::Output("x".into()).exit_code(), EXIT_OTHER);
    }
}
