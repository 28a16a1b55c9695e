//! Conditional-mean regressors behind one fit/predict interface, plus
//! distance-correlation feature screening.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dataset::Matrix;
use crate::error::{Error, Result};

pub mod gbt;
mod knn;
mod linear;
mod screen;

pub use gbt::{GbtModel, GbtParams};
pub use knn::KnnModel;
pub use linear::LinearModel;
pub use screen::{distance_correlation, screen_features};

/// A deterministic function of a feature vector, used as an oracle regressor.
type RowFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

#[derive(Clone)]
pub struct FixedFn(Arc<RowFn>);

impl FixedFn {
    pub fn new(f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self(Arc::new(f))
    }

    pub fn call(&self, x: &[f64]) -> f64 {
        (self.0)(x)
    }
}

impl fmt::Debug for FixedFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("FixedFn(..)")
    }
}

/// Extension point for learners that do not ship with the crate.
pub trait Learner: Send + Sync + fmt::Debug {
    fn fit(&self, features: &Matrix, targets: &[f64]) -> Result<Box<dyn Predictor>>;
}

pub trait Predictor: Send + Sync + fmt::Debug {
    fn predict(&self, row: &[f64]) -> f64;
}

#[derive(Debug, Clone)]
pub enum RegressorSpec {
    /// Ridge regression with an unpenalised intercept. `None` picks
    /// `1e-6 * trace(G'G) / d` on the centred design.
    Linear {
        ridge_lambda: Option<f64>,
    },
    Knn {
        k: usize,
    },
    Gbt(GbtParams),
    Fixed(FixedFn),
    Custom(Arc<dyn Learner>),
}

impl RegressorSpec {
    pub fn linear() -> Self {
        RegressorSpec::Linear { ridge_lambda: None }
    }

    pub fn gbt() -> Self {
        RegressorSpec::Gbt(GbtParams::default())
    }

    pub fn fixed(f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        RegressorSpec::Fixed(FixedFn::new(f))
    }

    pub fn kind(&self) -> &'static str {
        match self {
            RegressorSpec::Linear { .. } => "linear",
            RegressorSpec::Knn { .. } => "knn",
            RegressorSpec::Gbt(_) => "gbt",
            RegressorSpec::Fixed(_) => "fixed",
            RegressorSpec::Custom(_) => "custom",
        }
    }
}

/// Serializable description of the built-in learners, used by config files
/// and CLI flags. Fixed and custom regressors only exist in code.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum LearnerConfig {
    Linear {
        #[serde(default, alias = "lambda")]
        ridge_lambda: Option<f64>,
    },
    Knn {
        k: usize,
    },
    Gbt {
        #[serde(default = "gbt::default_eta")]
        eta: f64,
        #[serde(default = "gbt::default_nrounds")]
        nrounds: usize,
        #[serde(default = "gbt::default_max_depth")]
        max_depth: usize,
        #[serde(default = "gbt::default_min_leaf")]
        min_leaf: usize,
    },
}

impl Default for LearnerConfig {
    fn default() -> Self {
        let p = GbtParams::default();
        LearnerConfig::Gbt { eta: p.eta, nrounds: p.nrounds, max_depth: p.max_depth, min_leaf: p.min_leaf }
    }
}

impl From<&LearnerConfig> for RegressorSpec {
    fn from(c: &LearnerConfig) -> Self {
        match *c {
            LearnerConfig::Linear { ridge_lambda } => RegressorSpec::Linear { ridge_lambda },
            LearnerConfig::Knn { k } => RegressorSpec::Knn { k },
            LearnerConfig::Gbt { eta, nrounds, max_depth, min_leaf } => {
                RegressorSpec::Gbt(GbtParams { eta, nrounds, max_depth, min_leaf })
            }
        }
    }
}

/// Parses `kind[:key=value,...]`, e.g. `gbt:eta=0.05,nrounds=300`,
/// `linear:lambda=0` or `knn:k=15`.
impl std::str::FromStr for LearnerConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, params) = match s.split_once(':') {
            Some((k, p)) => (k.trim(), p),
            None => (s.trim(), ""),
        };
        let mut table = toml::Table::new();
        table.insert("kind".into(), toml::Value::String(kind.to_ascii_lowercase()));
        for kv in params.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (k, v) = kv.split_once('=').ok_or_else(|| Error::Config(format!("expected key=value in \"{kv}\"")))?;
            let value = if let Ok(i) = v.trim().parse::<i64>() {
                toml::Value::Integer(i)
            } else if let Ok(f) = v.trim().parse::<f64>() {
                toml::Value::Float(f)
            } else {
                return Err(Error::Config(format!("non-numeric value in \"{kv}\"")));
            };
            table.insert(k.trim().to_string(), value);
        }
        // Floats written without a decimal point arrive as integers.
        for key in ["eta", "ridge_lambda", "lambda"] {
            if let Some(toml::Value::Integer(i)) = table.get(key) {
                let f = *i as f64;
                table.insert(key.into(), toml::Value::Float(f));
            }
        }
        toml::Value::Table(table).try_into().map_err(|e| Error::Config(format!("bad regressor \"{s}\": {e}")))
    }
}

#[derive(Debug)]
enum Model {
    Linear(LinearModel),
    Knn(KnnModel),
    Gbt(GbtModel),
    Fixed(FixedFn),
    Custom(Box<dyn Predictor>),
}

/// Immutable conditional-mean predictor on `d`-dimensional feature vectors.
#[derive(Debug)]
pub struct FittedModel {
    d: usize,
    spec: RegressorSpec,
    model: Model,
}

impl FittedModel {
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn spec(&self) -> &RegressorSpec {
        &self.spec
    }

    pub fn as_gbt(&self) -> Option<&GbtModel> {
        match &self.model {
            Model::Gbt(m) => Some(m),
            _ => None,
        }
    }

    /// Prediction for one feature vector of length `d`.
    pub fn predict(&self, row: &[f64]) -> f64 {
        debug_assert_eq!(row.len(), self.d);
        match &self.model {
            Model::Linear(m) => m.predict(row),
            Model::Knn(m) => m.predict(row),
            Model::Gbt(m) => m.predict(row),
            Model::Fixed(f) => f.call(row),
            Model::Custom(p) => p.predict(row),
        }
    }
}

pub fn fit(spec: &RegressorSpec, features: &Matrix, targets: &[f64]) -> Result<FittedModel> {
    let (m, d) = (features.rows(), features.cols());
    if targets.len() != m {
        return Err(Error::DimensionMismatch { expected: m, got: targets.len() });
    }
    if let RegressorSpec::Fixed(f) = spec {
        return Ok(FittedModel { d, spec: spec.clone(), model: Model::Fixed(f.clone()) });
    }
    if m < 2 {
        return Err(Error::TooFewRows { needed: 2, got: m });
    }
    if features.as_slice().iter().chain(targets).any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite training data"));
    }
    let needs_features = !matches!(spec, RegressorSpec::Linear { .. });
    if d == 0 && needs_features {
        return Err(Error::invalid(format!("{} regressor needs at least one feature", spec.kind())));
    }
    let model = match spec {
        RegressorSpec::Linear { ridge_lambda } => Model::Linear(LinearModel::fit(features, targets, *ridge_lambda)?),
        RegressorSpec::Knn { k } => Model::Knn(KnnModel::fit(features, targets, *k)?),
        RegressorSpec::Gbt(params) => Model::Gbt(GbtModel::fit(params, features, targets)?),
        RegressorSpec::Custom(learner) => Model::Custom(learner.fit(features, targets)?),
        RegressorSpec::Fixed(_) => unreachable!(),
    };
    Ok(FittedModel { d, spec: spec.clone(), model })
}

/// Row-wise predictions.
pub fn predict_all(model: &FittedModel, features: &Matrix) -> Result<Vec<f64>> {
    if features.cols() != model.d && features.rows() > 0 {
        return Err(Error::DimensionMismatch { expected: model.d, got: features.cols() });
    }
    Ok((0..features.rows()).map(|i| model.predict(features.row(i))).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn column(v: &[f64]) -> Matrix {
        Matrix::new(v.len(), 1, v.to_vec()).unwrap()
    }

    #[test]
    fn linear_reproduces_exact_line() {
        let xs = [-1.5, 0.0, 0.3, 2.0, 7.25];
        let t: Vec<f64> = xs.iter().map(|x| 2.0 * x + 1.0).collect();
        let m = fit(&RegressorSpec::Linear { ridge_lambda: Some(0.0) }, &column(&xs), &t).unwrap();
        for x in [-3.0, 0.5, 10.0] {
            assert!((m.predict(&[x]) - (2.0 * x + 1.0)).abs() < 1e-10);
        }
        let two = fit(&RegressorSpec::Linear { ridge_lambda: Some(0.0) }, &column(&[1.0, 4.0]), &[3.0, 9.0]).unwrap();
        assert!((two.predict(&[2.0]) - 5.0).abs() < 1e-10);
    }

    #[test]
    fn gbt_without_rounds_is_mean() {
        let spec = RegressorSpec::Gbt(GbtParams { nrounds: 0, ..GbtParams::default() });
        let m = fit(&spec, &column(&[1.0, 2.0, 3.0, 4.0]), &[1.0, 5.0, 2.0, 8.0]).unwrap();
        for x in [-10.0, 2.5, 99.0] {
            assert_eq!(m.predict(&[x]), 4.0);
        }
    }

    #[test]
    fn knn_full_neighbourhood_is_mean() {
        let m = fit(&RegressorSpec::Knn { k: 4 }, &column(&[1.0, 2.0, 3.0, 4.0]), &[1.0, 5.0, 2.0, 8.0]).unwrap();
        for x in [-10.0, 2.5, 99.0] {
            assert_eq!(m.predict(&[x]), 4.0);
        }
        assert!(fit(&RegressorSpec::Knn { k: 5 }, &column(&[1.0, 2.0, 3.0, 4.0]), &[0.0; 4]).is_err());
    }

    #[test]
    fn fixed_predict_all() {
        let m = fit(&RegressorSpec::fixed(|x| x.iter().sum()), &Matrix::zeros(0, 2), &[]).unwrap();
        let rows = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(predict_all(&m, &rows).unwrap(), vec![3.0, 7.0]);
        assert!(predict_all(&m, &Matrix::zeros(0, 2)).unwrap().is_empty());
        let bad = Matrix::from_rows(&[vec![1.0, 2.0, 3.0]]).unwrap();
        assert!(predict_all(&m, &bad).is_err());
    }

    #[test]
    fn fixed_ignores_training_data() {
        let spec = RegressorSpec::fixed(|x| x[0] * x[0] - 1.0);
        let a = fit(&spec, &column(&[1.0, 2.0, 3.0]), &[0.0, 0.0, 0.0]).unwrap();
        let b = fit(&spec, &column(&[-4.0, 8.0]), &[5.0, -2.0]).unwrap();
        for x in [-2.0, 0.0, 0.7, 3.0] {
            assert_eq!(a.predict(&[x]), b.predict(&[x]));
        }
    }

    #[test]
    fn fit_errors() {
        assert!(matches!(fit(&RegressorSpec::linear(), &column(&[1.0]), &[1.0]), Err(Error::TooFewRows { .. })));
        assert!(fit(&RegressorSpec::linear(), &column(&[1.0, f64::NAN]), &[1.0, 2.0]).is_err());
        assert!(fit(&RegressorSpec::linear(), &column(&[1.0, 2.0]), &[1.0]).is_err());
        assert!(fit(&RegressorSpec::gbt(), &Matrix::zeros(3, 0), &[1.0, 2.0, 3.0]).is_err());
        let intercept = fit(&RegressorSpec::linear(), &Matrix::zeros(3, 0), &[1.0, 2.0, 6.0]).unwrap();
        assert!((intercept.predict(&[]) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn learner_config_strings() {
        let c: LearnerConfig = "gbt:eta=0.05,nrounds=300".parse().unwrap();
        assert_eq!(c, LearnerConfig::Gbt { eta: 0.05, nrounds: 300, max_depth: 6, min_leaf: 5 });
        let c: LearnerConfig = "linear:lambda=0".parse().unwrap();
        assert_eq!(c, LearnerConfig::Linear { ridge_lambda: Some(0.0) });
        let c: LearnerConfig = "linear".parse().unwrap();
        assert_eq!(c, LearnerConfig::Linear { ridge_lambda: None });
        let c: LearnerConfig = "knn:k=7".parse().unwrap();
        assert_eq!(c, LearnerConfig::Knn { k: 7 });
        assert!("forest".parse::<LearnerConfig>().is_err());
        assert!("gbt:depth=3".parse::<LearnerConfig>().is_err());
        assert!("knn".parse::<LearnerConfig>().is_err());
    }

    #[test]
    fn learner_config_toml() {
        let c: LearnerConfig = toml::from_str("kind = \"gbt\"\neta = 0.2\n").unwrap();
        assert_eq!(c, LearnerConfig::Gbt { eta: 0.2, nrounds: 200, max_depth: 6, min_leaf: 5 });
    }

    #[derive(Debug)]
    struct MeanLearner;

    #[derive(Debug)]
    struct Constant(f64);

    impl Predictor for Constant {
        fn predict(&self, _row: &[f64]) -> f64 {
            self.0
        }
    }

    impl Learner for MeanLearner {
        fn fit(&self, _features: &Matrix, targets: &[f64]) -> Result<Box<dyn Predictor>> {
            Ok(Box::new(Constant(targets.iter().sum::<f64>() / targets.len() as f64)))
        }
    }

    #[test]
    fn custom_learner_plugs_in() {
        let spec = RegressorSpec::Custom(Arc::new(MeanLearner));
        let m = fit(&spec, &column(&[0.0, 1.0]), &[2.0, 4.0]).unwrap();
        assert_eq!(m.predict(&[123.0]), 3.0);
        assert_eq!(m.spec().kind(), "custom");
    }
}
