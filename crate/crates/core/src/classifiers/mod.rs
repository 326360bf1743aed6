//! Binary classifiers behind a uniform train/predict contract.
//!
//! Labels are `0` (Non-VR) and `1` (VR). Logistic regression and kNN fit a
//! [`StandardScaler`] on their training rows and apply it internally; the
//! tree models and Gaussian naive Bayes consume raw features.

mod forest;
mod gnb;
mod knn;
mod logreg;
mod scaler;
mod tree;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::ErrorKind;

pub use forest::{train_forest, train_forest_with, ForestOptions, RandomForest};
pub use gnb::{train_gnb, GaussianNb};
pub use knn::{train_knn, KnnModel, KnnWeights};
pub use logreg::{logistic_objective, train_logreg, LogRegModel, LogRegReport};
pub use scaler::{fit_scaler, StandardScaler};
pub use tree::{train_tree, DecisionTree, Node, TreeParams};

pub const MODEL_FORMAT: &str = "vrqos-model";
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("empty training set")]
    EmptyInput,
    #[error("labels must be 0 or 1, found {0}")]
    NonBinaryLabel(u8),
    #[error("class {0} absent from the training data")]
    MissingClass(u8),
    #[error("row has {got} features, model expects {expected}")]
    FeatureCount { expected: usize, got: usize },
    #[error("rows and labels differ in length: {rows} vs {labels}")]
    LengthMismatch { rows: usize, labels: usize },
    #[error("invalid hyperparameters: {0}")]
    InvalidParams(String),
    #[error("model file: {0}")]
    Format(String),
}

impl ModelError {
    pub fn kind(&self) -> ErrorKind {
        match self {
            ModelError::Format(_) => ErrorKind::Parse,
            _ => ErrorKind::Contract,
        }
    }
}

/// Classifier family tag, as used on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Lr,
    Knn,
    Dt,
    Rf,
    Nb,
}

impl Family {
    pub const ALL: [Family; 5] = [Family::Lr, Family::Knn, Family::Dt, Family::Rf, Family::Nb];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Lr => "lr",
            Family::Knn => "knn",
            Family::Dt => "dt",
            Family::Rf => "rf",
            Family::Nb => "nb",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Family::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| format!("unknown family {s:?} (expected lr, knn, dt, rf or nb)"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum HyperParams {
    /// `solver` is recorded only; every tag runs the same optimizer.
    Lr { c: f64, solver: String },
    Knn { n_neighbors: usize, weights: KnnWeights },
    Dt { max_depth: usize, min_samples_split: usize },
    Rf {
        n_estimators: usize,
        max_depth: usize,
        min_samples_split: usize,
    },
    Nb { var_smoothing: f64 },
}

impl HyperParams {
    pub fn family(&self) -> Family {
        match self {
            HyperParams::Lr { .. } => Family::Lr,
            HyperParams::Knn { .. } => Family::Knn,
            HyperParams::Dt { .. } => Family::Dt,
            HyperParams::Rf { .. } => Family::Rf,
            HyperParams::Nb { .. } => Family::Nb,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |msg: &str| Err(ModelError::InvalidParams(msg.to_string()));
        match *self {
            HyperParams::Lr { c, .. } if !(c > 0.0 && c.is_finite()) => bad("C must be > 0"),
            HyperParams::Knn { n_neighbors: 0, .. } => bad("n_neighbors must be >= 1"),
            HyperParams::Dt { max_depth, min_samples_split }
            | HyperParams::Rf { max_depth, min_samples_split, .. }
                if max_depth < 1 || min_samples_split < 2 =>
            {
                bad("max_depth must be >= 1 and min_samples_split >= 2")
            }
            HyperParams::Rf { n_estimators: 0, .. } => bad("n_estimators must be >= 1"),
            HyperParams::Nb { var_smoothing } if !(var_smoothing > 0.0) => {
                bad("var_smoothing must be > 0")
            }
            _ => Ok(()),
        }
    }

    /// Compact `key=value` rendering used in reports.
    pub fn describe(&self) -> String {
        match self {
            HyperParams::Lr { c, solver } => format!("C={c},solver={solver}"),
            HyperParams::Knn { n_neighbors, weights } => {
                format!("n_neighbors={n_neighbors},weights={}", weights.as_str())
            }
            HyperParams::Dt { max_depth, min_samples_split } => {
                format!("max_depth={max_depth},min_samples_split={min_samples_split}")
            }
            HyperParams::Rf { n_estimators, max_depth, min_samples_split } => format!(
                "max_depth={max_depth},min_samples_split={min_samples_split},n_estimators={n_estimators}"
            ),
            HyperParams::Nb { var_smoothing } => format!("var_smoothing={var_smoothing:e}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Lr(LogRegModel),
    Knn(KnnModel),
    Dt(DecisionTree),
    Rf(RandomForest),
    Nb(GaussianNb),
}

impl ModelKind {
    fn predict(&self, x: &[f64]) -> u8 {
        match self {
            ModelKind::Lr(m) => m.predict(x),
            ModelKind::Knn(m) => m.predict(x),
            ModelKind::Dt(m) => m.predict(x),
            ModelKind::Rf(m) => m.predict(x),
            ModelKind::Nb(m) => m.predict(x),
        }
    }
}

pub(crate) fn check_training_set(x: &[Vec<f64>], y: &[u8]) -> Result<usize, ModelError> {
    if x.is_empty() {
        return Err(ModelError::EmptyInput);
    }
    if x.len() != y.len() {
        return Err(ModelError::LengthMismatch {
            rows: x.len(),
            labels: y.len(),
        });
    }
    if let Some(&bad) = y.iter().find(|&&l| l > 1) {
        return Err(ModelError::NonBinaryLabel(bad));
    }
    let width = x[0].len();
    if let Some(row) = x.iter().find(|r| r.len() != width) {
        return Err(ModelError::FeatureCount {
            expected: width,
            got: row.len(),
        });
    }
    Ok(width)
}

/// Trains one family on every column of `x`.
pub fn train(x: &[Vec<f64>], y: &[u8], params: &HyperParams, seed: u64) -> Result<ModelKind, ModelError> {
    params.validate()?;
    Ok(match params {
        HyperParams::Lr { c, solver } => ModelKind::Lr(train_logreg(x, y, *c, solver)?),
        HyperParams::Knn { n_neighbors, weights } => {
            ModelKind::Knn(train_knn(x, y, *n_neighbors, *weights)?)
        }
        HyperParams::Dt { max_depth, min_samples_split } => ModelKind::Dt(train_tree(
            x,
            y,
            &TreeParams {
                max_depth: *max_depth,
                min_samples_split: *min_samples_split,
            },
        )?),
        HyperParams::Rf { n_estimators, max_depth, min_samples_split } => ModelKind::Rf(train_forest(
            x,
            y,
            *n_estimators,
            &TreeParams {
                max_depth: *max_depth,
                min_samples_split: *min_samples_split,
            },
            seed,
        )?),
        HyperParams::Nb { var_smoothing } => ModelKind::Nb(train_gnb(x, y, *var_smoothing)?),
    })
}

/// A fitted classifier together with the input columns it reads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub params: HyperParams,
    pub seed: u64,
    /// Width of the rows accepted by [`TrainedModel::predict`].
    pub input_width: usize,
    /// Columns of the input row the model was trained on, in order.
    pub features: Vec<usize>,
    pub kind: ModelKind,
}

fn project(row: &[f64], features: &[usize]) -> Vec<f64> {
    features.iter().map(|&i| row[i]).collect()
}

impl TrainedModel {
    /// Fits on the selected `features` of full-width rows.
    pub fn fit(
        x: &[Vec<f64>],
        y: &[u8],
        features: &[usize],
        params: &HyperParams,
        seed: u64,
    ) -> Result<Self, ModelError> {
        let width = check_training_set(x, y)?;
        if features.is_empty() {
            return Err(ModelError::InvalidParams("no input features selected".into()));
        }
        if let Some(&f) = features.iter().find(|&&f| f >= width) {
            return Err(ModelError::InvalidParams(format!(
                "feature index {f} out of range for {width} columns"
            )));
        }
        let projected: Vec<Vec<f64>> = x.iter().map(|r| project(r, features)).collect();
        let kind = train(&projected, y, params, seed)?;
        Ok(TrainedModel {
            params: params.clone(),
            seed,
            input_width: width,
            features: features.to_vec(),
            kind,
        })
    }

    /// Fits on all columns.
    pub fn fit_all(x: &[Vec<f64>], y: &[u8], params: &HyperParams, seed: u64) -> Result<Self, ModelError> {
        let width = check_training_set(x, y)?;
        let all: Vec<usize> = (0..width).collect();
        Self::fit(x, y, &all, params, seed)
    }

    pub fn family(&self) -> Family {
        self.params.family()
    }

    pub fn predict(&self, row: &[f64]) -> Result<u8, ModelError> {
        if row.len() != self.input_width {
            return Err(ModelError::FeatureCount {
                expected: self.input_width,
                got: row.len(),
            });
        }
        Ok(self.kind.predict(&project(row, &self.features)))
    }

    pub fn predict_batch(&self, rows: &[Vec<f64>]) -> Result<Vec<u8>, ModelError> {
        rows.iter().map(|r| self.predict(r)).collect()
    }

    /// Whether the model can ever look at input column `column`.
    pub fn reads_feature(&self, column: usize) -> bool {
        let Some(local) = self.features.iter().position(|&f| f == column) else {
            return false;
        };
        match &self.kind {
            ModelKind::Dt(t) => t.used_features().contains(&local),
            ModelKind::Rf(f) => f.trees.iter().any(|t| t.used_features().contains(&local)),
            _ => true,
        }
    }

    /// Self-describing JSON body of a model file.
    pub fn to_json(&self) -> String {
        let envelope = serde_json::json!({
            "format": MODEL_FORMAT,
            "version": MODEL_FORMAT_VERSION,
            "family": self.family().as_str(),
            "model": self,
        });
        serde_json::to_string_pretty(&envelope).expect("model serializes")
    }

    /// Parses a model file; leading `#` lines are ignored.
    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let body: String = text
            .lines()
            .skip_while(|l| l.starts_with('#'))
            .collect::<Vec<_>>()
            .join("\n");
        let value: serde_json::Value =
            serde_json::from_str(&body).map_err(|e| ModelError::Format(e.to_string()))?;
        if value.get("format").and_then(|v| v.as_str()) != Some(MODEL_FORMAT) {
            return Err(ModelError::Format(format!("not a {MODEL_FORMAT} file")));
        }
        let version = value.get("version").and_then(|v| v.as_u64());
        if version != Some(MODEL_FORMAT_VERSION as u64) {
            return Err(ModelError::Format(format!("unsupported version {version:?}")));
        }
        let model = value
            .get("model")
            .cloned()
            .ok_or_else(|| ModelError::Format("missing model body".into()))?;
        serde_json::from_value(model).map_err(|e| ModelError::Format(e.to_string()))
    }
}
