use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::split::{split, Partition, SplitRatios};
use super::{decode_records, DatasetError, Record, SCHEMA_VERSION};
use crate::canon::{canonical_json, sha256_hex};

/// `<dir>/<stem>.manifest.json` for a data file `<dir>/<stem>.<ext>`.
pub fn manifest_path(data_path: &Path) -> PathBuf {
    let stem = data_path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    data_path.with_file_name(format!("{stem}.manifest.json"))
}

/// Per-flag record counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlagCount {
    pub negative: u64,
    pub positive: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSummary {
    pub seed: u64,
    pub ratios: SplitRatios,
    pub train: u64,
    pub val: u64,
    pub test: u64,
}

/// Provenance supplied by the caller of [`super::export_records`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ManifestInputs {
    pub master_seed: u64,
    pub registry_digest: String,
    pub split: Option<(SplitRatios, u64)>,
    /// Free-form run configuration recorded verbatim.
    pub config: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub schema_version: u32,
    /// File name of the data file, relative to the manifest.
    pub data_file: String,
    pub master_seed: u64,
    pub registry_digest: String,
    /// SHA-256 of the data file bytes.
    pub content_digest: String,
    pub record_count: u64,
    pub scenarios: BTreeMap<String, u64>,
    pub label_histogram: BTreeMap<String, FlagCount>,
    pub skip_count: u64,
    pub split: Option<SplitSummary>,
    pub config: serde_json::Value,
}

fn histogram(records: &[Record]) -> BTreeMap<String, FlagCount> {
    let mut h: BTreeMap<String, FlagCount> = BTreeMap::new();
    for r in records {
        for (name, flag) in &r.labels.flags {
            let c = h.entry(name.clone()).or_default();
            if *flag == 1 {
                c.positive += 1;
            } else {
                c.negative += 1;
            }
        }
    }
    h
}

impl Manifest {
    pub(super) fn build(
        records: &[Record],
        data: &[u8],
        data_path: &Path,
        inputs: &ManifestInputs,
    ) -> Result<Manifest, DatasetError> {
        let mut scenarios: BTreeMap<String, u64> = BTreeMap::new();
        for r in records {
            *scenarios.entry(r.scenario_id.clone()).or_default() += 1;
        }
        let split = match inputs.split {
            None => None,
            Some((ratios, seed)) => {
                let ids: Vec<&str> = records.iter().map(|r| r.record_id.as_str()).collect();
                let parts = split(&ids, ratios, seed)?;
                let count = |p| parts.iter().filter(|x| **x == p).count() as u64;
                Some(SplitSummary {
                    seed,
                    ratios,
                    train: count(Partition::Train),
                    val: count(Partition::Val),
                    test: count(Partition::Test),
                })
            }
        };
        Ok(Manifest {
            schema_version: SCHEMA_VERSION,
            data_file: data_path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
            master_seed: inputs.master_seed,
            registry_digest: inputs.registry_digest.clone(),
            content_digest: sha256_hex(data),
            record_count: records.len() as u64,
            scenarios,
            label_histogram: histogram(records),
            skip_count: records.iter().filter(|r| r.is_skipped()).count() as u64,
            split,
            config: inputs.config.clone(),
        })
    }

    pub fn to_text(&self) -> String {
        let mut text = canonical_json(self).expect("manifest serializes");
        text.push('\n');
        text
    }

    pub fn write(&self, path: &Path) -> Result<(), DatasetError> {
        fs::write(path, self.to_text()).map_err(|e| DatasetError::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Manifest, DatasetError> {
        let text = fs::read_to_string(path).map_err(|e| DatasetError::io(path, e))?;
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| DatasetError::Parse { line: e.line(), message: e.to_string() })?;
        match value.get("schema_version").and_then(serde_json::Value::as_u64) {
            Some(v) if v == u64::from(SCHEMA_VERSION) => {}
            other => {
                return Err(DatasetError::SchemaVersion {
                    line: 1,
                    found: other.map_or("none".to_string(), |v| v.to_string()),
                })
            }
        }
        serde_json::from_value(value).map_err(|e| DatasetError::Parse { line: 1, message: e.to_string() })
    }
}

/// Re-reads the data file next to `manifest_file` and checks its digest,
/// counts and label histogram against the manifest. Returns the records.
pub fn verify_manifest(manifest_file: &Path) -> Result<(Manifest, Vec<Record>), DatasetError> {
    let manifest = Manifest::read(manifest_file)?;
    let data_path = manifest_file.with_file_name(&manifest.data_file);
    let bytes = fs::read(&data_path).map_err(|e| DatasetError::io(&data_path, e))?;
    let digest = sha256_hex(&bytes);
    if digest != manifest.content_digest {
        return Err(DatasetError::Mismatch(format!(
            "{}: content digest {digest} does not match manifest {}",
            data_path.display(),
            manifest.content_digest
        )));
    }
    let text = String::from_utf8(bytes)
        .map_err(|e| DatasetError::Parse { line: 0, message: format!("data file is not UTF-8: {e}") })?;
    let records = decode_records(&text)?;
    if records.len() as u64 != manifest.record_count {
        return Err(DatasetError::Mismatch(format!(
            "manifest lists {} records, data file has {}",
            manifest.record_count,
            records.len()
        )));
    }
    if histogram(&records) != manifest.label_histogram {
        return Err(DatasetError::Mismatch("label histogram does not match the data file".into()));
    }
    Ok((manifest, records))
}
