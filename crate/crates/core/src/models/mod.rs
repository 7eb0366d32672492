//! Decision-tree ensembles for binary case classification.
//!
//! [`gbt`] is second-order gradient boosting under logistic loss with exact
//! greedy split finding; [`forest`] is a Gini random forest with bootstrap
//! resampling and per-node feature subsampling. Both learn axis-aligned
//! trees that send a row left iff `x[feature] < threshold`.

mod columns;
pub mod forest;
pub mod gbt;
mod serialize;
mod tree;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use columns::SortedColumns;
pub use forest::{gini_impurity, rf_predict_proba, rf_train, ForestModel, ForestParams};
pub use gbt::{
    gbt_predict_proba, gbt_train, grow_tree, logistic_grad_hess, logistic_loss, sigmoid, GbtModel, GbtParams,
    GrownTree, SplitRecord, TreeParams, GAIN_TOLERANCE,
};
pub use serialize::{deserialize_model, serialize_model, SCHEMA_VERSION};
pub use tree::{Node, Tree};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("training set is empty")]
    EmptyCohort,
    #[error("training labels contain a single class")]
    SingleClassCohort,
    #[error("row {row} has {got} features, expected {expected}")]
    RaggedMatrix { row: usize, expected: usize, got: usize },
    #[error("{rows} rows but {labels} labels")]
    LabelCountMismatch { rows: usize, labels: usize },
    #[error("label {value} at row {row} is not 0 or 1")]
    InvalidLabel { row: usize, value: u8 },
    #[error("non-finite feature value at row {row}, feature {feature}")]
    NonFiniteFeature { row: usize, feature: usize },
    #[error("Gini impurity of an empty node")]
    EmptyNode,
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("expected {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("schema version {found} is not supported (expected {expected})")]
    SchemaVersionMismatch { found: u32, expected: u32 },
    #[error("malformed model document: {0}")]
    Malformed(String),
}

pub type Result<T, E = ModelError> = std::result::Result<T, E>;

/// Checks a training set and returns its feature count.
///
/// Rows must be equally long, finite, and labeled 0/1 with both classes
/// present.
pub fn validate_training(rows: &[&[f32]], labels: &[u8]) -> Result<usize> {
    if rows.is_empty() {
        return Err(ModelError::EmptyCohort);
    }
    if rows.len() != labels.len() {
        return Err(ModelError::LabelCountMismatch {
            rows: rows.len(),
            labels: labels.len(),
        });
    }
    let n_features = rows[0].len();
    for (i, row) in rows.iter().enumerate() {
        if row.len() != n_features {
            return Err(ModelError::RaggedMatrix {
                row: i,
                expected: n_features,
                got: row.len(),
            });
        }
        if let Some(f) = row.iter().position(|v| !v.is_finite()) {
            return Err(ModelError::NonFiniteFeature { row: i, feature: f });
        }
    }
    if let Some((row, &value)) = labels.iter().enumerate().find(|(_, &y)| y > 1) {
        return Err(ModelError::InvalidLabel { row, value });
    }
    let positives = labels.iter().filter(|&&y| y == 1).count();
    if positives == 0 || positives == labels.len() {
        return Err(ModelError::SingleClassCohort);
    }
    Ok(n_features)
}

/// Which learner to train, with its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model_type", content = "params", rename_all = "lowercase")]
pub enum ModelSpec {
    Gbt(GbtParams),
    Rf(ForestParams),
}

impl ModelSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            ModelSpec::Gbt(_) => "gbt",
            ModelSpec::Rf(_) => "rf",
        }
    }

    /// Default hyperparameters for `"gbt"` or `"rf"`.
    pub fn default_for(kind: &str) -> Option<Self> {
        match kind {
            "gbt" => Some(ModelSpec::Gbt(GbtParams::default())),
            "rf" => Some(ModelSpec::Rf(ForestParams::default())),
            _ => None,
        }
    }

    pub fn train(&self, rows: &[&[f32]], labels: &[u8], seed: u64) -> Result<Model> {
        match self {
            ModelSpec::Gbt(p) => gbt_train(rows, labels, p, seed).map(Model::Gbt),
            ModelSpec::Rf(p) => rf_train(rows, labels, p, seed).map(Model::Rf),
        }
    }
}

/// A trained ensemble of either kind.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Gbt(GbtModel),
    Rf(ForestModel),
}

impl Model {
    pub fn kind(&self) -> &'static str {
        match self {
            Model::Gbt(_) => "gbt",
            Model::Rf(_) => "rf",
        }
    }

    pub fn n_features(&self) -> usize {
        match self {
            Model::Gbt(m) => m.n_features,
            Model::Rf(m) => m.n_features,
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            Model::Gbt(m) => m.seed,
            Model::Rf(m) => m.seed,
        }
    }

    /// Probability of the positive class.
    pub fn predict_proba(&self, features: &[f32]) -> Result<f64> {
        match self {
            Model::Gbt(m) => gbt_predict_proba(m, features),
            Model::Rf(m) => rf_predict_proba(m, features),
        }
    }

    pub fn predict_many(&self, rows: &[&[f32]]) -> Result<Vec<f64>> {
        rows.iter().map(|r| self.predict_proba(r)).collect()
    }
}
