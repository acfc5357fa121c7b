use serde::{Deserialize, Serialize};

use super::EnvelopeError;
use crate::dataset::Record;
use crate::twin::{ObsValue, Observation};

/// Base features in their fixed order.
pub const BASE_FEATURES: [&str; 7] =
    ["observed_clearance", "table_w", "table_d", "object_radius", "object_mass", "lighting", "detected"];

/// All feature names: the base list followed by one `has_<name>` presence
/// indicator per base feature.
pub fn feature_names() -> Vec<String> {
    BASE_FEATURES
        .iter()
        .map(|n| n.to_string())
        .chain(BASE_FEATURES.iter().map(|n| format!("has_{n}")))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub names: Vec<String>,
    pub values: Vec<f64>,
}

impl FeatureVector {
    /// Absent fields read as 0 with their indicator at 0.
    pub fn from_lookup(get: impl Fn(&str) -> Option<f64>) -> Self {
        let mut values = vec![0.0; BASE_FEATURES.len() * 2];
        for (i, name) in BASE_FEATURES.iter().enumerate() {
            if let Some(v) = get(name) {
                values[i] = v;
                values[BASE_FEATURES.len() + i] = 1.0;
            }
        }
        FeatureVector { names: feature_names(), values }
    }

    pub fn from_observation(obs: &Observation) -> Self {
        let fields = obs.fields();
        Self::from_lookup(|name| fields.iter().find(|(n, _)| *n == name).and_then(|(_, v)| v.as_scalar()))
    }

    pub fn from_record(record: &Record) -> Self {
        Self::from_lookup(|name| record.observation.get(name).and_then(ObsValue::as_scalar))
    }

    pub fn check_names(&self, expected: &[String]) -> Result<(), EnvelopeError> {
        if self.names != expected {
            return Err(EnvelopeError::FeatureMismatch { expected: expected.to_vec(), found: self.names.clone() });
        }
        Ok(())
    }
}

/// Training or evaluation rows with 0/1 targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<f64>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Non-skipped records carrying `target_flag`; skipped records are dropped.
    pub fn from_records<'a>(records: impl IntoIterator<Item = &'a Record>, target_flag: &str) -> Result<Batch, EnvelopeError> {
        let mut batch = Batch { features: Vec::new(), labels: Vec::new() };
        for r in records {
            if r.is_skipped() {
                continue;
            }
            let y = r
                .flag(target_flag)
                .ok_or_else(|| EnvelopeError::MissingFlag { record_id: r.record_id.clone(), flag: target_flag.to_string() })?;
            batch.features.push(FeatureVector::from_record(r).values);
            batch.labels.push(if y { 1.0 } else { 0.0 });
        }
        Ok(batch)
    }
}
