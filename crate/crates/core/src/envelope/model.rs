use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::features::{feature_names, Batch, FeatureVector};
use super::EnvelopeError;
use crate::canon::{canonical_json, sha256_hex, to_canonical_string};

pub const MODEL_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub learning_rate: f64,
    pub epochs: u32,
    pub l2: f64,
    /// Unused by full-batch descent; recorded for provenance.
    pub seed: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams { learning_rate: 0.1, epochs: 200, l2: 1e-4, seed: 0 }
    }
}

impl Hyperparams {
    pub fn check(&self) -> Result<(), EnvelopeError> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(EnvelopeError::BadHyperparams(format!("learning_rate must be > 0, got {}", self.learning_rate)));
        }
        if self.epochs == 0 {
            return Err(EnvelopeError::BadHyperparams("epochs must be >= 1".into()));
        }
        if !(self.l2.is_finite() && self.l2 >= 0.0) {
            return Err(EnvelopeError::BadHyperparams(format!("l2 must be >= 0, got {}", self.l2)));
        }
        Ok(())
    }
}

/// Standardization for one feature. `pinned` features had zero variance in
/// training; their weight stays 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureStat {
    pub mean: f64,
    pub std: f64,
    pub pinned: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub target_flag: String,
    pub hyperparams: Option<Hyperparams>,
    pub train_count: u64,
    pub initial_loss: f64,
    pub final_loss: f64,
    /// Content digest of the dataset the model was trained on.
    pub dataset_digest: Option<String>,
    pub registry_digest: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvelopeModel {
    pub schema_version: u32,
    pub feature_names: Vec<String>,
    pub stats: Vec<FeatureStat>,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub tau: f64,
    pub meta: TrainingMeta,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub weights: Vec<f64>,
    pub bias: f64,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

impl EnvelopeModel {
    /// The untrained model: zero weights and identity standardization.
    pub fn zero(tau: f64) -> Self {
        let names = feature_names();
        let n = names.len();
        EnvelopeModel {
            schema_version: MODEL_SCHEMA_VERSION,
            feature_names: names,
            stats: vec![FeatureStat { mean: 0.0, std: 1.0, pinned: false }; n],
            weights: vec![0.0; n],
            bias: 0.0,
            tau,
            meta: TrainingMeta::default(),
        }
    }

    fn standardize(&self, x: &[f64]) -> impl Iterator<Item = f64> + '_ {
        x.iter().zip(&self.stats).map(|(v, s)| (v - s.mean) / s.std).collect::<Vec<_>>().into_iter()
    }

    fn logit(&self, x: &[f64]) -> f64 {
        self.standardize(x).zip(&self.weights).map(|(v, w)| v * w).sum::<f64>() + self.bias
    }

    fn check_width(&self, x: &[f64]) -> Result<(), EnvelopeError> {
        if x.len() != self.weights.len() {
            return Err(EnvelopeError::FeatureMismatch {
                expected: self.feature_names.clone(),
                found: vec![format!("<{} unnamed values>", x.len())],
            });
        }
        Ok(())
    }

    /// Probability of the violation class.
    pub fn predict(&self, features: &FeatureVector) -> Result<f64, EnvelopeError> {
        features.check_names(&self.feature_names)?;
        self.predict_raw(&features.values)
    }

    pub fn predict_raw(&self, x: &[f64]) -> Result<f64, EnvelopeError> {
        self.check_width(x)?;
        Ok(sigmoid(self.logit(x)))
    }

    /// SHA-256 of the model's canonical JSON.
    pub fn digest(&self) -> String {
        sha256_hex(canonical_json(self).expect("models always serialize").as_bytes())
    }

    /// Canonical file text: the model's fields plus `model_digest`.
    pub fn to_text(&self) -> String {
        let mut value = serde_json::to_value(self).expect("models always serialize");
        value["model_digest"] = serde_json::Value::String(self.digest());
        let mut text = to_canonical_string(&value);
        text.push('\n');
        text
    }

    pub fn save(&self, path: &Path) -> Result<(), EnvelopeError> {
        fs::write(path, self.to_text()).map_err(|e| EnvelopeError::Io(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self, EnvelopeError> {
        let text = fs::read_to_string(path).map_err(|e| EnvelopeError::Io(format!("{}: {e}", path.display())))?;
        Self::from_text(&text)
    }

    pub fn from_text(text: &str) -> Result<Self, EnvelopeError> {
        let mut value: serde_json::Value = serde_json::from_str(text).map_err(|e| EnvelopeError::Format(e.to_string()))?;
        match value.get("schema_version").and_then(serde_json::Value::as_u64) {
            Some(v) if v == u64::from(MODEL_SCHEMA_VERSION) => {}
            other => return Err(EnvelopeError::SchemaVersion(other.map_or("none".into(), |v| v.to_string()))),
        }
        let recorded = match value.as_object_mut().and_then(|o| o.remove("model_digest")) {
            Some(serde_json::Value::String(d)) => d,
            _ => return Err(EnvelopeError::Format("missing model_digest".into())),
        };
        let model: EnvelopeModel = serde_json::from_value(value).map_err(|e| EnvelopeError::Format(e.to_string()))?;
        let actual = model.digest();
        if actual != recorded {
            return Err(EnvelopeError::Tampered { recorded, actual });
        }
        let n = model.feature_names.len();
        if model.stats.len() != n || model.weights.len() != n {
            return Err(EnvelopeError::Format("feature, stat and weight counts differ".into()));
        }
        Ok(model)
    }
}

fn check_batch(model: &EnvelopeModel, batch: &Batch) -> Result<(), EnvelopeError> {
    if batch.is_empty() {
        return Err(EnvelopeError::EmptyBatch);
    }
    batch.features.iter().try_for_each(|x| model.check_width(x))
}

/// Mean cross-entropy plus `l2 * |w|^2 / 2`.
pub fn loss(model: &EnvelopeModel, batch: &Batch, l2: f64) -> Result<f64, EnvelopeError> {
    check_batch(model, batch)?;
    let ce: f64 = batch
        .features
        .iter()
        .zip(&batch.labels)
        .map(|(x, y)| {
            let z = model.logit(x);
            softplus(z) - y * z
        })
        .sum::<f64>()
        / batch.len() as f64;
    Ok(ce + 0.5 * l2 * model.weights.iter().map(|w| w * w).sum::<f64>())
}

/// Analytic gradient of [`loss`] with respect to weights and bias.
pub fn gradient(model: &EnvelopeModel, batch: &Batch, l2: f64) -> Result<Gradient, EnvelopeError> {
    check_batch(model, batch)?;
    let n = batch.len() as f64;
    let mut gw = vec![0.0; model.weights.len()];
    let mut gb = 0.0;
    for (x, y) in batch.features.iter().zip(&batch.labels) {
        let xs: Vec<f64> = model.standardize(x).collect();
        let z: f64 = xs.iter().zip(&model.weights).map(|(v, w)| v * w).sum::<f64>() + model.bias;
        let r = sigmoid(z) - y;
        for (g, v) in gw.iter_mut().zip(&xs) {
            *g += r * v;
        }
        gb += r;
    }
    for (g, w) in gw.iter_mut().zip(&model.weights) {
        *g = *g / n + l2 * w;
    }
    Ok(Gradient { weights: gw, bias: gb / n })
}

fn feature_stats(batch: &Batch) -> Vec<FeatureStat> {
    let n = batch.len() as f64;
    let width = batch.features[0].len();
    (0..width)
        .map(|j| {
            let mean = batch.features.iter().map(|x| x[j]).sum::<f64>() / n;
            let var = batch.features.iter().map(|x| (x[j] - mean).powi(2)).sum::<f64>() / n;
            let std = var.sqrt();
            // Relative cutoff so that a constant column is caught despite rounding in the mean.
            if std > 1e-12 * mean.abs().max(1.0) {
                FeatureStat { mean, std, pinned: false }
            } else {
                FeatureStat { mean, std: 1.0, pinned: true }
            }
        })
        .collect()
}

/// Full-batch gradient descent from zero. Returns the model and the loss
/// before each update plus the final loss (`epochs + 1` values).
pub fn train_traced(batch: &Batch, target_flag: &str, hp: &Hyperparams, tau: f64) -> Result<(EnvelopeModel, Vec<f64>), EnvelopeError> {
    hp.check()?;
    let positives = batch.labels.iter().filter(|y| **y == 1.0).count();
    if batch.len() < 2 || positives == 0 || positives == batch.len() {
        return Err(EnvelopeError::DegenerateLabels { count: batch.len(), positives });
    }
    let mut model = EnvelopeModel::zero(tau);
    check_batch(&model, batch)?;
    model.stats = feature_stats(batch);
    let mut history = Vec::with_capacity(hp.epochs as usize + 1);
    for epoch in 0..=hp.epochs {
        let l = loss(&model, batch, hp.l2)?;
        if !l.is_finite() {
            return Err(EnvelopeError::NonFinite { epoch });
        }
        history.push(l);
        if epoch == hp.epochs {
            break;
        }
        let g = gradient(&model, batch, hp.l2)?;
        for ((w, gw), s) in model.weights.iter_mut().zip(&g.weights).zip(&model.stats) {
            if !s.pinned {
                *w -= hp.learning_rate * gw;
            }
        }
        model.bias -= hp.learning_rate * g.bias;
        if model.weights.iter().any(|w| !w.is_finite()) || !model.bias.is_finite() {
            return Err(EnvelopeError::NonFinite { epoch });
        }
    }
    model.meta = TrainingMeta {
        target_flag: target_flag.to_string(),
        hyperparams: Some(*hp),
        train_count: batch.len() as u64,
        initial_loss: history[0],
        final_loss: *history.last().expect("at least one loss"),
        dataset_digest: None,
        registry_digest: None,
    };
    Ok((model, history))
}

pub fn train(batch: &Batch, target_flag: &str, hp: &Hyperparams) -> Result<EnvelopeModel, EnvelopeError> {
    train_traced(batch, target_flag, hp, 0.5).map(|(m, _)| m)
}
