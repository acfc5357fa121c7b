//! Labeled records on disk: one canonical JSON line per record, a manifest
//! beside the data file, and hash-based train/val/test splits.

mod manifest;
mod split;

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canon::{canonical_json, Real};
use crate::genvar::Variation;
use crate::labeler::{label_scene, LabelError, LabelRule, LabelSet};
use crate::twin::ObsValue;

pub use manifest::{manifest_path, verify_manifest, FlagCount, Manifest, ManifestInputs, SplitSummary};
pub use split::{split, split_key, Partition, SplitRatios};

/// Version of the record line and manifest layout.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("duplicate record id `{0}`")]
    DupRecordId(String),
    #[error("line {line}: schema_version {found} is not supported (expected {SCHEMA_VERSION})")]
    SchemaVersion { line: usize, found: String },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{0}")]
    BadRatios(String),
    #[error("record {record_id}: {source}")]
    Label { record_id: String, source: LabelError },
    #[error("{0}")]
    Mismatch(String),
}

impl DatasetError {
    pub fn code(&self) -> &'static str {
        match self {
            DatasetError::Io { .. } => "E_IO",
            DatasetError::DupRecordId(_) => "E_DUP_RECORD_ID",
            DatasetError::SchemaVersion { .. } => "E_SCHEMA_VERSION",
            DatasetError::Parse { .. } => "E_PARSE",
            DatasetError::BadRatios(_) => "E_BAD_RATIOS",
            DatasetError::Label { source, .. } => source.code(),
            DatasetError::Mismatch(_) => "E_DIGEST_MISMATCH",
        }
    }

    pub(crate) fn io(path: &Path, source: io::Error) -> Self {
        DatasetError::Io { path: path.to_path_buf(), source }
    }
}

/// One variation with its ground-truth labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Record {
    pub record_id: String,
    pub scenario_id: String,
    pub variation_index: u64,
    /// Sampled parameters in canonical units.
    pub params: BTreeMap<String, Real>,
    /// Sensed fields; empty for skipped records.
    pub observation: BTreeMap<String, ObsValue>,
    pub labels: LabelSet,
    pub injections_applied: Vec<String>,
    pub skipped: u8,
    pub skip_reason: Option<String>,
    pub schema_version: u32,
}

impl Record {
    pub fn id_for(scenario_id: &str, index: u64) -> String {
        format!("{scenario_id}/{index}")
    }

    pub fn is_skipped(&self) -> bool {
        self.skipped != 0
    }

    pub fn flag(&self, name: &str) -> Option<bool> {
        self.labels.flag(name)
    }

    pub fn observed(&self, field: &str) -> Option<f64> {
        self.observation.get(field).and_then(ObsValue::as_scalar)
    }

    /// The record's canonical line, without the trailing LF.
    pub fn to_line(&self) -> String {
        canonical_json(self).expect("records always serialize")
    }
}

/// Labels a variation with `rules` and flattens it into a record.
pub fn build_record(variation: &Variation, rules: &[LabelRule]) -> Result<Record, DatasetError> {
    let params_map = |p: &crate::twin::ParamAssignment| p.to_map().into_iter().map(|(k, v)| (k, Real(v))).collect();
    Ok(match variation {
        Variation::Generated { scene, observation, params } => {
            let record_id = Record::id_for(&scene.scenario_id, scene.variation_index);
            let labels = label_scene(scene, rules)
                .map_err(|source| DatasetError::Label { record_id: record_id.clone(), source })?;
            Record {
                record_id,
                scenario_id: scene.scenario_id.clone(),
                variation_index: scene.variation_index,
                params: params_map(params),
                observation: observation.fields().into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
                labels,
                injections_applied: scene.injections_applied.clone(),
                skipped: 0,
                skip_reason: None,
                schema_version: SCHEMA_VERSION,
            }
        }
        Variation::Skipped { scenario_id, index, params, reason } => Record {
            record_id: Record::id_for(scenario_id, *index),
            scenario_id: scenario_id.clone(),
            variation_index: *index,
            params: params_map(params),
            observation: BTreeMap::new(),
            labels: LabelSet::default(),
            injections_applied: Vec::new(),
            skipped: 1,
            skip_reason: Some(reason.clone()),
            schema_version: SCHEMA_VERSION,
        },
    })
}

pub fn build_records(variations: &[Variation], rules: &[LabelRule]) -> Result<Vec<Record>, DatasetError> {
    variations.iter().map(|v| build_record(v, rules)).collect()
}

/// Concatenated canonical lines, each terminated by LF.
pub fn encode_records(records: &[Record]) -> Result<String, DatasetError> {
    let mut seen = HashSet::new();
    let mut out = String::new();
    for r in records {
        if !seen.insert(r.record_id.as_str()) {
            return Err(DatasetError::DupRecordId(r.record_id.clone()));
        }
        out.push_str(&r.to_line());
        out.push('\n');
    }
    Ok(out)
}

/// Parses data-file text. Every line, including the last, must end in LF.
pub fn decode_records(text: &str) -> Result<Vec<Record>, DatasetError> {
    let mut records = Vec::new();
    let mut rest = text;
    let mut line_no = 0;
    while !rest.is_empty() {
        line_no += 1;
        let Some(end) = rest.find('\n') else {
            return Err(DatasetError::Parse { line: line_no, message: "record line is not terminated (truncated file?)".into() });
        };
        let line = &rest[..end];
        rest = &rest[end + 1..];
        let value: serde_json::Value =
            serde_json::from_str(line).map_err(|e| DatasetError::Parse { line: line_no, message: e.to_string() })?;
        match value.get("schema_version") {
            Some(v) if v.as_u64() == Some(u64::from(SCHEMA_VERSION)) => {}
            Some(v) => return Err(DatasetError::SchemaVersion { line: line_no, found: v.to_string() }),
            None => return Err(DatasetError::Parse { line: line_no, message: "missing schema_version".into() }),
        }
        let record: Record =
            serde_json::from_value(value).map_err(|e| DatasetError::Parse { line: line_no, message: e.to_string() })?;
        records.push(record);
    }
    Ok(records)
}

/// Writes the data file and its manifest. On a duplicate id nothing is written.
pub fn export_records(records: &[Record], out_path: &Path, inputs: &ManifestInputs) -> Result<Manifest, DatasetError> {
    let text = encode_records(records)?;
    let manifest = Manifest::build(records, text.as_bytes(), out_path, inputs)?;
    fs::write(out_path, text.as_bytes()).map_err(|e| DatasetError::io(out_path, e))?;
    let mpath = manifest_path(out_path);
    if let Err(e) = manifest.write(&mpath) {
        let _ = fs::remove_file(out_path);
        return Err(e);
    }
    Ok(manifest)
}

pub fn load_records(path: &Path) -> Result<Vec<Record>, DatasetError> {
    let text = fs::read_to_string(path).map_err(|e| DatasetError::io(path, e))?;
    decode_records(&text)
}
