//! The learned safety envelope: features, a logistic classifier trained by
//! full-batch gradient descent, evaluation and the planner override rule.
//!
//! Violation is the positive class. A probability equal to `tau` counts as
//! positive, so ties resolve toward overriding the planner.

mod features;
mod model;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::twin::Observation;

pub use features::{feature_names, Batch, FeatureVector, BASE_FEATURES};
pub use model::{
    gradient, loss, train, train_traced, EnvelopeModel, FeatureStat, Gradient, Hyperparams, TrainingMeta,
    MODEL_SCHEMA_VERSION,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnvelopeError {
    #[error("training set needs both label values (got {positives} positives in {count} records)")]
    DegenerateLabels { count: usize, positives: usize },
    #[error("loss became non-finite at epoch {epoch}; lower the learning rate")]
    NonFinite { epoch: u32 },
    #[error("feature layout mismatch: model expects {expected:?}, input has {found:?}")]
    FeatureMismatch { expected: Vec<String>, found: Vec<String> },
    #[error("record {record_id} has no label `{flag}`")]
    MissingFlag { record_id: String, flag: String },
    #[error("batch is empty")]
    EmptyBatch,
    #[error("{0}")]
    BadHyperparams(String),
    #[error("model schema_version {0} is not supported")]
    SchemaVersion(String),
    #[error("malformed model file: {0}")]
    Format(String),
    #[error("model file digest {recorded} does not match its contents ({actual})")]
    Tampered { recorded: String, actual: String },
    #[error("{0}")]
    Io(String),
}

impl EnvelopeError {
    pub fn code(&self) -> &'static str {
        match self {
            EnvelopeError::DegenerateLabels { .. } => "E_DEGENERATE_LABELS",
            EnvelopeError::NonFinite { .. } => "E_NONFINITE",
            EnvelopeError::FeatureMismatch { .. } => "E_FEATURE_MISMATCH",
            EnvelopeError::MissingFlag { .. } => "E_MISSING_FLAG",
            EnvelopeError::EmptyBatch => "E_EMPTY_BATCH",
            EnvelopeError::BadHyperparams(_) => "E_BAD_HYPERPARAMS",
            EnvelopeError::SchemaVersion(_) => "E_SCHEMA_VERSION",
            EnvelopeError::Format(_) => "E_PARSE",
            EnvelopeError::Tampered { .. } => "E_DIGEST_MISMATCH",
            EnvelopeError::Io(_) => "E_IO",
        }
    }
}

/// Confusion counts and derived rates; a rate whose denominator is zero is
/// `None` (serialized as `null`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub accuracy: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub false_negative_rate: Option<f64>,
}

impl EvalMetrics {
    pub fn from_counts(tp: u64, fp: u64, tn: u64, fn_: u64) -> Self {
        let ratio = |num: u64, den: u64| (den > 0).then(|| num as f64 / den as f64);
        EvalMetrics {
            tp,
            fp,
            tn,
            fn_,
            accuracy: ratio(tp + tn, tp + fp + tn + fn_),
            precision: ratio(tp, tp + fp),
            recall: ratio(tp, tp + fn_),
            false_negative_rate: ratio(fn_, tp + fn_),
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

/// Thresholds predictions at `model.tau`.
pub fn evaluate(model: &EnvelopeModel, batch: &Batch) -> Result<EvalMetrics, EnvelopeError> {
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for (x, y) in batch.features.iter().zip(&batch.labels) {
        let positive = model.predict_raw(x)? >= model.tau;
        match (positive, *y == 1.0) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    Ok(EvalMetrics::from_counts(tp, fp, tn, fn_))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Allow,
    Override,
}

/// `Override` exactly when the predicted violation probability is at least `tau`.
pub fn override_decision(model: &EnvelopeModel, observation: &Observation, tau: f64) -> Result<Decision, EnvelopeError> {
    let p = model.predict(&FeatureVector::from_observation(observation))?;
    Ok(if p >= tau { Decision::Override } else { Decision::Allow })
}
