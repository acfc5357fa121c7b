//! The protection universe: assets, their exposure modes and the hazard
//! scenarios that realize them.
//!
//! Declarations are collected into a [`RegistryDraft`], validated as a whole
//! and frozen into an immutable [`Registry`]. Every declared asset is kept;
//! the model has no notion of priority or severity ranking.

mod validate;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::canon::{canonical_json, sha256_hex};
use crate::genvar::ParameterSpace;
use crate::hsl::SourceSpan;
use crate::labeler::LabelRule;
use crate::twin::{InjectionSpec, TwinKind, TwinTemplate};

pub use validate::{is_valid_id, ErrorCode, SubjectKind, ValidationError, ValidationReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssetKind {
    Human,
    Organizational,
    Environmental,
}

impl AssetKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AssetKind::Human => "human",
            AssetKind::Organizational => "organizational",
            AssetKind::Environmental => "environmental",
        }
    }
}

impl FromStr for AssetKind {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "human" => Ok(AssetKind::Human),
            "organizational" => Ok(AssetKind::Organizational),
            "environmental" => Ok(AssetKind::Environmental),
            _ => Err(()),
        }
    }
}

impl fmt::Display for AssetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A declared asset. `kind` may be omitted on sub-assets, which then inherit
/// it from their parent.
#[derive(Debug, Clone, PartialEq)]
pub struct AssetDecl {
    pub id: String,
    pub display_name: String,
    pub kind: Option<AssetKind>,
    pub parent: Option<String>,
    pub notes: String,
    pub span: Option<SourceSpan>,
}

impl AssetDecl {
    pub fn new(id: &str, kind: AssetKind) -> Self {
        AssetDecl {
            id: id.to_string(),
            display_name: String::new(),
            kind: Some(kind),
            parent: None,
            notes: String::new(),
            span: None,
        }
    }

    pub fn sub(id: &str, parent: &str) -> Self {
        AssetDecl {
            id: id.to_string(),
            display_name: String::new(),
            kind: None,
            parent: Some(parent.to_string()),
            notes: String::new(),
            span: None,
        }
    }
}

/// How an asset can become susceptible to harm. Carries no cause.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExposureMode {
    pub id: String,
    pub asset_id: String,
    pub vector: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExposureDecl {
    pub exposure: ExposureMode,
    pub span: Option<SourceSpan>,
}

/// A concrete causal chain bound to a twin archetype.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HazardScenario {
    pub id: String,
    pub exposure_id: String,
    pub cause: String,
    pub twin: String,
    pub params: ParameterSpace,
    pub injections: Vec<InjectionSpec>,
    pub label_rules: Vec<LabelRule>,
}

impl HazardScenario {
    pub fn twin_kind(&self) -> Option<TwinKind> {
        self.twin.parse().ok()
    }

    pub fn template(&self) -> Option<&'static TwinTemplate> {
        self.twin_kind().map(TwinKind::template)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioDecl {
    pub scenario: HazardScenario,
    pub span: Option<SourceSpan>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Declaration {
    Asset(AssetDecl),
    Exposure(ExposureDecl),
    Scenario(ScenarioDecl),
}

impl Declaration {
    pub fn id(&self) -> &str {
        match self {
            Declaration::Asset(a) => &a.id,
            Declaration::Exposure(e) => &e.exposure.id,
            Declaration::Scenario(s) => &s.scenario.id,
        }
    }

    pub fn subject_kind(&self) -> SubjectKind {
        match self {
            Declaration::Asset(_) => SubjectKind::Asset,
            Declaration::Exposure(_) => SubjectKind::Exposure,
            Declaration::Scenario(_) => SubjectKind::Scenario,
        }
    }

    pub fn span(&self) -> Option<&SourceSpan> {
        match self {
            Declaration::Asset(a) => a.span.as_ref(),
            Declaration::Exposure(e) => e.span.as_ref(),
            Declaration::Scenario(s) => s.span.as_ref(),
        }
    }
}

/// A resolved asset: `kind` is always known after validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetNode {
    pub id: String,
    pub display_name: String,
    pub kind: AssetKind,
    pub parent: Option<String>,
    pub notes: String,
}

/// Editable collection of declarations, not yet checked.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RegistryDraft {
    pub assets: Vec<AssetDecl>,
    pub exposures: Vec<ExposureDecl>,
    pub scenarios: Vec<ScenarioDecl>,
}

impl RegistryDraft {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_declarations(decls: impl IntoIterator<Item = Declaration>) -> Self {
        let mut draft = RegistryDraft::new();
        for d in decls {
            draft.push(d);
        }
        draft
    }

    pub fn push(&mut self, decl: Declaration) {
        match decl {
            Declaration::Asset(a) => self.assets.push(a),
            Declaration::Exposure(e) => self.exposures.push(e),
            Declaration::Scenario(s) => self.scenarios.push(s),
        }
    }

    /// Enumerates every invariant violation; the draft is not modified.
    pub fn validate(&self) -> ValidationReport {
        validate::validate(self)
    }

    /// Validates and, when clean, produces the immutable registry.
    pub fn freeze(&self) -> Result<Registry, ValidationReport> {
        let report = self.validate();
        if !report.ok() {
            return Err(report);
        }
        let kinds = validate::resolve_kinds(self);
        let assets = self
            .assets
            .iter()
            .map(|a| {
                let node = AssetNode {
                    id: a.id.clone(),
                    display_name: a.display_name.clone(),
                    kind: kinds[&a.id],
                    parent: a.parent.clone(),
                    notes: a.notes.clone(),
                };
                (a.id.clone(), node)
            })
            .collect();
        let exposures = self.exposures.iter().map(|e| (e.exposure.id.clone(), e.exposure.clone())).collect();
        let scenarios = self.scenarios.iter().map(|s| (s.scenario.id.clone(), s.scenario.clone())).collect();
        Ok(Registry::seal(assets, exposures, scenarios))
    }
}

/// Builds and freezes a registry from declarations in one step.
pub fn build_registry(decls: impl IntoIterator<Item = Declaration>) -> Result<Registry, ValidationReport> {
    RegistryDraft::from_declarations(decls).freeze()
}

#[derive(Serialize)]
struct RegistryContents<'a> {
    assets: &'a BTreeMap<String, AssetNode>,
    exposures: &'a BTreeMap<String, ExposureMode>,
    scenarios: &'a BTreeMap<String, HazardScenario>,
}

#[derive(Deserialize)]
struct OwnedRegistryContents {
    assets: BTreeMap<String, AssetNode>,
    exposures: BTreeMap<String, ExposureMode>,
    scenarios: BTreeMap<String, HazardScenario>,
}

/// Frozen ontology. There is no mutating API; edits go through
/// [`Registry::to_draft`] and a fresh freeze.
#[derive(Debug, Clone, PartialEq)]
pub struct Registry {
    assets: BTreeMap<String, AssetNode>,
    exposures: BTreeMap<String, ExposureMode>,
    scenarios: BTreeMap<String, HazardScenario>,
    canonical: String,
    digest: String,
}

impl Registry {
    fn seal(
        assets: BTreeMap<String, AssetNode>,
        exposures: BTreeMap<String, ExposureMode>,
        scenarios: BTreeMap<String, HazardScenario>,
    ) -> Self {
        let canonical = canonical_json(&RegistryContents { assets: &assets, exposures: &exposures, scenarios: &scenarios })
            .expect("registry contents serialize");
        let digest = sha256_hex(canonical.as_bytes());
        Registry { assets, exposures, scenarios, canonical, digest }
    }

    pub fn assets(&self) -> &BTreeMap<String, AssetNode> {
        &self.assets
    }

    pub fn exposures(&self) -> &BTreeMap<String, ExposureMode> {
        &self.exposures
    }

    pub fn scenarios(&self) -> &BTreeMap<String, HazardScenario> {
        &self.scenarios
    }

    pub fn asset(&self, id: &str) -> Option<&AssetNode> {
        self.assets.get(id)
    }

    pub fn exposure(&self, id: &str) -> Option<&ExposureMode> {
        self.exposures.get(id)
    }

    pub fn scenario(&self, id: &str) -> Option<&HazardScenario> {
        self.scenarios.get(id)
    }

    /// Canonical JSON text of the registry contents.
    pub fn canonical_text(&self) -> &str {
        &self.canonical
    }

    /// SHA-256 of [`Registry::canonical_text`].
    pub fn digest(&self) -> &str {
        &self.digest
    }

    /// Parses canonical registry text and re-validates it.
    pub fn from_canonical_text(text: &str) -> Result<Registry, String> {
        let contents: OwnedRegistryContents = serde_json::from_str(text).map_err(|e| e.to_string())?;
        let mut draft = RegistryDraft::new();
        for a in contents.assets.into_values() {
            draft.assets.push(AssetDecl {
                id: a.id,
                display_name: a.display_name,
                kind: Some(a.kind),
                parent: a.parent,
                notes: a.notes,
                span: None,
            });
        }
        for e in contents.exposures.into_values() {
            draft.exposures.push(ExposureDecl { exposure: e, span: None });
        }
        for s in contents.scenarios.into_values() {
            draft.scenarios.push(ScenarioDecl { scenario: s, span: None });
        }
        draft.freeze().map_err(|r| r.to_string())
    }

    pub fn to_draft(&self) -> RegistryDraft {
        RegistryDraft {
            assets: self
                .assets
                .values()
                .map(|a| AssetDecl {
                    id: a.id.clone(),
                    display_name: a.display_name.clone(),
                    kind: Some(a.kind),
                    parent: a.parent.clone(),
                    notes: a.notes.clone(),
                    span: None,
                })
                .collect(),
            exposures: self.exposures.values().map(|e| ExposureDecl { exposure: e.clone(), span: None }).collect(),
            scenarios: self.scenarios.values().map(|s| ScenarioDecl { scenario: s.clone(), span: None }).collect(),
        }
    }

    pub fn validate(&self) -> ValidationReport {
        self.to_draft().validate()
    }
}
