//! Baseline price models frozen at the base date.

mod encoding;
mod forest;
mod linear;

use std::path::Path;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use encoding::{encode, FeatureVector, Layout, Vocabulary};
pub use forest::{tree_features, ForestModel, ForestParams, Node, SplitRule, Tree, N_TREE_FEATURES};
pub use linear::{least_squares, LinearHedonicModel};

use crate::domain::{DiamondAttributes, Snapshot};
use crate::index::{calibrate, BaselineCalibration};
use crate::numeric::quantile_sorted;
use crate::{HciError, Result};

pub const MODEL_SCHEMA_VERSION: u32 = 1;

/// Anything that maps a stone to a log-scale price.
pub trait PricePredictor: Sync {
    fn log_predict(&self, attributes: &DiamondAttributes) -> f64;

    /// Predicted USD price, `exp` of the log prediction.
    fn predict(&self, attributes: &DiamondAttributes) -> f64 {
        self.log_predict(attributes).exp()
    }
}

impl PricePredictor for LinearHedonicModel {
    fn log_predict(&self, a: &DiamondAttributes) -> f64 {
        LinearHedonicModel::log_predict(self, a)
    }
}

impl PricePredictor for ForestModel {
    fn log_predict(&self, a: &DiamondAttributes) -> f64 {
        ForestModel::log_predict(self, a)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Linear(LinearHedonicModel),
    Forest(ForestModel),
}

impl PricePredictor for Model {
    fn log_predict(&self, a: &DiamondAttributes) -> f64 {
        match self {
            Model::Linear(m) => m.log_predict(a),
            Model::Forest(m) => m.log_predict(a),
        }
    }
}

impl Model {
    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Linear(_) => ModelKind::Linear,
            Model::Forest(_) => ModelKind::Forest,
        }
    }

    pub fn t0(&self) -> NaiveDate {
        match self {
            Model::Linear(m) => m.t0,
            Model::Forest(m) => m.t0,
        }
    }

    pub fn n_train(&self) -> usize {
        match self {
            Model::Linear(m) => m.n_train,
            Model::Forest(m) => m.n_train,
        }
    }

    pub fn residual_sd(&self) -> f64 {
        match self {
            Model::Linear(m) => m.residual_sd,
            Model::Forest(m) => m.residual_sd,
        }
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        match self {
            Model::Linear(m) => &m.vocabulary,
            Model::Forest(m) => &m.vocabulary,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Linear,
    Forest,
}

/// What to fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PredictorSpec {
    Linear,
    Forest(ForestParams),
}

impl Default for PredictorSpec {
    fn default() -> Self {
        PredictorSpec::Linear
    }
}

/// A fitted model together with its base-date calibration.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselinePredictor {
    pub model: Model,
    pub calibration: BaselineCalibration,
}

impl PricePredictor for BaselinePredictor {
    fn log_predict(&self, a: &DiamondAttributes) -> f64 {
        self.model.log_predict(a)
    }
}

pub fn fit_linear(baseline: &Snapshot) -> Result<LinearHedonicModel> {
    LinearHedonicModel::fit(baseline)
}

pub fn fit_forest(baseline: &Snapshot, params: &ForestParams) -> Result<ForestModel> {
    ForestModel::fit(baseline, params)
}

impl BaselinePredictor {
    pub fn from_model(model: Model, baseline: &Snapshot) -> Result<Self> {
        let calibration = calibrate(&model, baseline)?;
        Ok(BaselinePredictor { model, calibration })
    }

    pub fn fit(baseline: &Snapshot, spec: &PredictorSpec) -> Result<Self> {
        let model = match spec {
            PredictorSpec::Linear => Model::Linear(fit_linear(baseline)?),
            PredictorSpec::Forest(p) => Model::Forest(fit_forest(baseline, p)?),
        };
        Self::from_model(model, baseline)
    }

    /// Short identifier derived from the model kind and base date.
    pub fn model_id(&self) -> String {
        let kind = match self.model.kind() {
            ModelKind::Linear => "linear",
            ModelKind::Forest => "forest",
        };
        format!("{kind}-{}", self.model.t0())
    }

    pub fn to_json(&self) -> Result<String> {
        let parameters = match &self.model {
            Model::Linear(m) => serde_json::to_value(LinearParameters {
                coefficients: m.coefficients.clone(),
                aliased: m.aliased.clone(),
                r_squared: m.r_squared,
            })?,
            Model::Forest(m) => serde_json::to_value(ForestParameters {
                hyperparams: m.params.clone(),
                trees: m.trees.clone(),
            })?,
        };
        let file = ModelFile {
            schema_version: MODEL_SCHEMA_VERSION,
            kind: self.model.kind(),
            t0: self.model.t0(),
            n_train: self.model.n_train(),
            residual_sd: self.model.residual_sd(),
            vocabulary: self.model.vocabulary().clone(),
            parameters,
            calibration: self.calibration.clone(),
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let found = value
            .get("schema_version")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| HciError::Schema("model file has no schema_version".into()))?;
        if found != u64::from(MODEL_SCHEMA_VERSION) {
            return Err(HciError::VersionMismatch {
                found: u32::try_from(found).unwrap_or(u32::MAX),
                expected: MODEL_SCHEMA_VERSION,
            });
        }
        let file: ModelFile = serde_json::from_value(value)?;
        let model = match file.kind {
            ModelKind::Linear => {
                let p: LinearParameters = serde_json::from_value(file.parameters)?;
                let dim = Layout::new(&file.vocabulary).dim;
                if p.coefficients.len() != dim {
                    return Err(HciError::Schema(format!(
                        "linear model has {} coefficients, vocabulary implies {dim}",
                        p.coefficients.len()
                    )));
                }
                Model::Linear(LinearHedonicModel {
                    vocabulary: file.vocabulary,
                    coefficients: p.coefficients,
                    aliased: p.aliased,
                    residual_sd: file.residual_sd,
                    r_squared: p.r_squared,
                    t0: file.t0,
                    n_train: file.n_train,
                })
            }
            ModelKind::Forest => {
                let p: ForestParameters = serde_json::from_value(file.parameters)?;
                let m = ForestModel {
                    vocabulary: file.vocabulary,
                    params: p.hyperparams,
                    trees: p.trees,
                    residual_sd: file.residual_sd,
                    t0: file.t0,
                    n_train: file.n_train,
                };
                m.validate()?;
                Model::Forest(m)
            }
        };
        Ok(BaselinePredictor {
            model,
            calibration: file.calibration,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    schema_version: u32,
    kind: ModelKind,
    t0: NaiveDate,
    n_train: usize,
    residual_sd: f64,
    vocabulary: Vocabulary,
    parameters: serde_json::Value,
    calibration: BaselineCalibration,
}

#[derive(Serialize, Deserialize)]
struct LinearParameters {
    coefficients: Vec<f64>,
    aliased: Vec<usize>,
    r_squared: f64,
}

#[derive(Serialize, Deserialize)]
struct ForestParameters {
    hyperparams: ForestParams,
    trees: Vec<Tree>,
}

pub fn predict(model: &impl PricePredictor, attributes: &DiamondAttributes) -> f64 {
    model.predict(attributes)
}

pub fn save_model(model: &BaselinePredictor, path: &Path) -> Result<()> {
    let text = model.to_json()?;
    std::fs::write(path, text).map_err(|e| HciError::io(path, e))
}

pub fn load_model(path: &Path) -> Result<BaselinePredictor> {
    let text = std::fs::read_to_string(path).map_err(|e| HciError::io(path, e))?;
    BaselinePredictor::from_json(&text)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    pub n: usize,
    pub median: f64,
    pub p90: f64,
}

/// Median and 90th percentile of `|P - F| / P` over a holdout snapshot.
pub fn holdout_relative_error(model: &impl PricePredictor, holdout: &Snapshot) -> Result<ErrorSummary> {
    if holdout.is_empty() {
        return Err(HciError::InsufficientData("holdout snapshot is empty".into()));
    }
    let mut errs: Vec<f64> = holdout
        .records()
        .par_iter()
        .map(|r| {
            let p = r.price.to_f64();
            (p - model.predict(&r.attributes)).abs() / p
        })
        .collect();
    errs.sort_by(f64::total_cmp);
    Ok(ErrorSummary {
        n: errs.len(),
        median: quantile_sorted(&errs, 0.5),
        p90: quantile_sorted(&errs, 0.9),
    })
}
