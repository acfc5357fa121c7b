use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::Serialize;

use super::{AssetKind, RegistryDraft};
use crate::labeler::Predicate;
use crate::twin::TwinTemplate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum ErrorCode {
    #[serde(rename = "E_DUP_ID")]
    DupId,
    #[serde(rename = "E_DANGLING_REF")]
    DanglingRef,
    #[serde(rename = "E_CYCLE")]
    Cycle,
    #[serde(rename = "E_UNBOUND_DIM")]
    UnboundDim,
    #[serde(rename = "E_UNKNOWN_METRIC")]
    UnknownMetric,
    #[serde(rename = "E_DIM_MISMATCH")]
    DimMismatch,
    #[serde(rename = "E_BAD_ID")]
    BadId,
    #[serde(rename = "E_BAD_DIST")]
    BadDist,
    #[serde(rename = "E_BAD_INJECTION")]
    BadInjection,
    #[serde(rename = "E_INCOMPATIBLE_INJECTION")]
    IncompatibleInjection,
    #[serde(rename = "E_MISSING_KIND")]
    MissingKind,
    #[serde(rename = "E_KIND_MISMATCH")]
    KindMismatch,
}

impl ErrorCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCode::DupId => "E_DUP_ID",
            ErrorCode::DanglingRef => "E_DANGLING_REF",
            ErrorCode::Cycle => "E_CYCLE",
            ErrorCode::UnboundDim => "E_UNBOUND_DIM",
            ErrorCode::UnknownMetric => "E_UNKNOWN_METRIC",
            ErrorCode::DimMismatch => "E_DIM_MISMATCH",
            ErrorCode::BadId => "E_BAD_ID",
            ErrorCode::BadDist => "E_BAD_DIST",
            ErrorCode::BadInjection => "E_BAD_INJECTION",
            ErrorCode::IncompatibleInjection => "E_INCOMPATIBLE_INJECTION",
            ErrorCode::MissingKind => "E_MISSING_KIND",
            ErrorCode::KindMismatch => "E_KIND_MISMATCH",
        }
    }
}

impl fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SubjectKind {
    Asset,
    Exposure,
    Scenario,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct ValidationError {
    pub code: ErrorCode,
    pub subject_kind: SubjectKind,
    pub subject_id: String,
    pub message: String,
}

/// Every violation found, sorted so that the report does not depend on
/// declaration order. `ok()` holds exactly when `errors` is empty.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub errors: Vec<ValidationError>,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.errors.is_empty()
    }

    pub fn count(&self, code: ErrorCode) -> usize {
        self.errors.iter().filter(|e| e.code == code).count()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.errors.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{}: {}", e.code, e.message)?;
        }
        Ok(())
    }
}

/// `[a-z][a-z0-9_]*` segments joined by dots.
pub fn is_valid_id(id: &str) -> bool {
    !id.is_empty()
        && id.split('.').all(|seg| {
            let mut chars = seg.chars();
            matches!(chars.next(), Some('a'..='z'))
                && chars.all(|c| matches!(c, 'a'..='z' | '0'..='9' | '_'))
        })
}

struct Sink(Vec<ValidationError>);

impl Sink {
    fn push(&mut self, code: ErrorCode, subject_kind: SubjectKind, subject_id: &str, message: String) {
        self.0.push(ValidationError { code, subject_kind, subject_id: subject_id.to_string(), message });
    }
}

fn counts<'a>(ids: impl Iterator<Item = &'a str>) -> HashMap<&'a str, usize> {
    let mut out = HashMap::new();
    for id in ids {
        *out.entry(id).or_insert(0) += 1;
    }
    out
}

pub(super) fn validate(draft: &RegistryDraft) -> ValidationReport {
    let mut sink = Sink(Vec::new());

    let asset_counts = counts(draft.assets.iter().map(|a| a.id.as_str()));
    let exposure_counts = counts(draft.exposures.iter().map(|e| e.exposure.id.as_str()));
    let scenario_counts = counts(draft.scenarios.iter().map(|s| s.scenario.id.as_str()));

    for (kind, table) in [
        (SubjectKind::Asset, &asset_counts),
        (SubjectKind::Exposure, &exposure_counts),
        (SubjectKind::Scenario, &scenario_counts),
    ] {
        for (id, n) in table {
            if !is_valid_id(id) {
                for _ in 0..*n {
                    sink.push(ErrorCode::BadId, kind, id, format!("`{id}` is not a lowercase dotted identifier"));
                }
            }
            for _ in 1..*n {
                sink.push(ErrorCode::DupId, kind, id, format!("identifier `{id}` is declared {n} times"));
            }
        }
    }

    check_assets(draft, &asset_counts, &mut sink);

    for e in &draft.exposures {
        let e = &e.exposure;
        if !asset_counts.contains_key(e.asset_id.as_str()) {
            sink.push(
                ErrorCode::DanglingRef,
                SubjectKind::Exposure,
                &e.id,
                format!("exposure `{}` references undeclared asset `{}`", e.id, e.asset_id),
            );
        }
    }

    for s in &draft.scenarios {
        let s = &s.scenario;
        if !exposure_counts.contains_key(s.exposure_id.as_str()) {
            sink.push(
                ErrorCode::DanglingRef,
                SubjectKind::Scenario,
                &s.id,
                format!("scenario `{}` references undeclared exposure `{}`", s.id, s.exposure_id),
            );
        }
        check_scenario_params(s, &mut sink);
        match s.template() {
            Some(template) => check_scenario_twin(s, template, &mut sink),
            None => sink.push(
                ErrorCode::DanglingRef,
                SubjectKind::Scenario,
                &s.id,
                format!("scenario `{}` references unknown twin archetype `{}`", s.id, s.twin),
            ),
        }
    }

    let mut errors = sink.0;
    errors.sort();
    ValidationReport { errors }
}

fn check_assets(draft: &RegistryDraft, asset_counts: &HashMap<&str, usize>, sink: &mut Sink) {
    let unique: BTreeMap<&str, &super::AssetDecl> = draft
        .assets
        .iter()
        .filter(|a| asset_counts[a.id.as_str()] == 1)
        .map(|a| (a.id.as_str(), a))
        .collect();

    for a in &draft.assets {
        if let Some(parent) = &a.parent {
            if !asset_counts.contains_key(parent.as_str()) {
                sink.push(
                    ErrorCode::DanglingRef,
                    SubjectKind::Asset,
                    &a.id,
                    format!("asset `{}` names undeclared parent `{parent}`", a.id),
                );
            }
        }
    }

    // Walk parent chains among uniquely declared assets; duplicated ids end
    // a chain so the outcome does not depend on which copy is seen first.
    let on_cycle = cycle_members(&unique);
    for id in &on_cycle {
        sink.push(ErrorCode::Cycle, SubjectKind::Asset, id, format!("asset `{id}` lies on a parent cycle"));
    }

    for (id, a) in &unique {
        if on_cycle.contains(*id) {
            continue;
        }
        match &a.parent {
            None => {
                if a.kind.is_none() {
                    sink.push(
                        ErrorCode::MissingKind,
                        SubjectKind::Asset,
                        id,
                        format!("root asset `{id}` declares no kind"),
                    );
                }
            }
            Some(parent_id) => {
                let Some(parent_kind) = resolved_kind(parent_id, &unique, &on_cycle) else {
                    continue;
                };
                if let Some(kind) = a.kind {
                    if kind != parent_kind && parent_kind != AssetKind::Human {
                        sink.push(
                            ErrorCode::KindMismatch,
                            SubjectKind::Asset,
                            id,
                            format!(
                                "asset `{id}` is {kind} but its parent `{parent_id}` is {parent_kind}; only human assets may have sub-assets of another kind"
                            ),
                        );
                    }
                }
            }
        }
    }
}

fn cycle_members(unique: &BTreeMap<&str, &super::AssetDecl>) -> HashSet<String> {
    let mut on_cycle = HashSet::new();
    for start in unique.keys() {
        let mut seen: Vec<&str> = Vec::new();
        let mut cur = *start;
        loop {
            if let Some(pos) = seen.iter().position(|s| *s == cur) {
                if pos == 0 {
                    on_cycle.insert(start.to_string());
                }
                break;
            }
            seen.push(cur);
            match unique.get(cur).and_then(|a| a.parent.as_deref()) {
                Some(next) if unique.contains_key(next) => cur = next,
                _ => break,
            }
        }
    }
    on_cycle
}

/// Kind of `id` after inheritance, or `None` when it cannot be determined.
fn resolved_kind(id: &str, unique: &BTreeMap<&str, &super::AssetDecl>, on_cycle: &HashSet<String>) -> Option<AssetKind> {
    let mut cur = id;
    let mut steps = 0;
    loop {
        if on_cycle.contains(cur) || steps > unique.len() {
            return None;
        }
        let a = unique.get(cur)?;
        if let Some(k) = a.kind {
            return Some(k);
        }
        cur = a.parent.as_deref()?;
        steps += 1;
    }
}

pub(super) fn resolve_kinds(draft: &RegistryDraft) -> HashMap<String, AssetKind> {
    let unique: BTreeMap<&str, &super::AssetDecl> = draft.assets.iter().map(|a| (a.id.as_str(), a)).collect();
    let none = HashSet::new();
    unique
        .keys()
        .map(|id| (id.to_string(), resolved_kind(id, &unique, &none).expect("validated registry")))
        .collect()
}

fn check_scenario_params(s: &super::HazardScenario, sink: &mut Sink) {
    let param_counts = counts(s.params.dims.iter().map(|d| d.name.as_str()));
    let mut reported = HashSet::new();
    for d in &s.params.dims {
        if param_counts[d.name.as_str()] > 1 && reported.insert(d.name.as_str()) {
            sink.push(
                ErrorCode::DupId,
                SubjectKind::Scenario,
                &s.id,
                format!("scenario `{}` binds parameter `{}` more than once", s.id, d.name),
            );
        }
        if let Err(why) = d.dist.check() {
            sink.push(
                ErrorCode::BadDist,
                SubjectKind::Scenario,
                &s.id,
                format!("parameter `{}` of scenario `{}`: {why}", d.name, s.id),
            );
        }
    }
    let rule_counts = counts(s.label_rules.iter().map(|r| r.name.as_str()));
    let mut reported = HashSet::new();
    for r in &s.label_rules {
        if rule_counts[r.name.as_str()] > 1 && reported.insert(r.name.as_str()) {
            sink.push(
                ErrorCode::DupId,
                SubjectKind::Scenario,
                &s.id,
                format!("scenario `{}` declares label `{}` more than once", s.id, r.name),
            );
        }
    }
    for inj in &s.injections {
        if let Err(why) = inj.check() {
            sink.push(ErrorCode::BadInjection, SubjectKind::Scenario, &s.id, format!("scenario `{}`: {why}", s.id));
        }
    }
}

fn check_scenario_twin(s: &super::HazardScenario, template: &TwinTemplate, sink: &mut Sink) {
    for (name, dim) in template.required_dims {
        match s.params.get(name) {
            None => sink.push(
                ErrorCode::UnboundDim,
                SubjectKind::Scenario,
                &s.id,
                format!("scenario `{}` leaves {} dimension `{name}` unbound", s.id, template.kind),
            ),
            Some(dist) if dist.dimension != *dim => sink.push(
                ErrorCode::DimMismatch,
                SubjectKind::Scenario,
                &s.id,
                format!("parameter `{name}` of scenario `{}` must be {dim}, got {}", s.id, dist.dimension),
            ),
            Some(_) => {}
        }
    }
    for inj in &s.injections {
        if !template.accepts(inj.kind()) {
            sink.push(
                ErrorCode::IncompatibleInjection,
                SubjectKind::Scenario,
                &s.id,
                format!("injection {} cannot be applied to {}", inj.kind(), template.kind),
            );
        }
    }
    for rule in &s.label_rules {
        check_predicate(s, &rule.name, &rule.predicate, template, sink);
    }
}

fn check_predicate(s: &super::HazardScenario, rule: &str, p: &Predicate, template: &TwinTemplate, sink: &mut Sink) {
    for c in p.comparisons() {
        match template.metric(&c.metric) {
            None => sink.push(
                ErrorCode::UnknownMetric,
                SubjectKind::Scenario,
                &s.id,
                format!("label `{rule}` uses metric `{}`, which {} does not emit", c.metric, template.kind),
            ),
            Some(dim) if dim != c.dimension => sink.push(
                ErrorCode::DimMismatch,
                SubjectKind::Scenario,
                &s.id,
                format!("label `{rule}` compares {dim} metric `{}` with a {} quantity", c.metric, c.dimension),
            ),
            Some(_) => {}
        }
    }
}
