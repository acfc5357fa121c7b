//! Lowering: AST to ontology declarations with canonical units.

use super::ast::*;
use super::span::{Diagnostic, SourceSpan};
use crate::genvar::{DistributionSpec, ParameterSpace};
use crate::labeler::{LabelRule, Predicate, Severity};
use crate::ontology::{
    AssetDecl, AssetKind, Declaration, ExposureDecl, ExposureMode, HazardScenario, ScenarioDecl,
};
use crate::twin::{InjectionKind, InjectionSpec, TwinKind, TwinTemplate, DEFAULT_OCCLUDER_SIZE};
use crate::units::{Dimension, Quantity};

/// Declarations in source order plus non-fatal warnings.
#[derive(Debug, Clone, PartialEq)]
pub struct Lowered {
    pub declarations: Vec<Declaration>,
    pub warnings: Vec<Diagnostic>,
}

#[derive(Default)]
struct Sink {
    errors: Vec<Diagnostic>,
    warnings: Vec<Diagnostic>,
}

impl Sink {
    fn error(&mut self, code: &'static str, message: impl Into<String>, span: &SourceSpan) {
        self.errors.push(Diagnostic::error(code, message, span.clone()));
    }
}

pub fn lower(doc: &Document) -> Result<Lowered, Vec<Diagnostic>> {
    let mut sink = Sink::default();
    let mut declarations = Vec::new();
    for item in &doc.items {
        let before = sink.errors.len();
        let decl = match item {
            Item::Asset(a) => Declaration::Asset(lower_asset(a, &mut sink)),
            Item::Exposure(e) => Declaration::Exposure(lower_exposure(e, &mut sink)),
            Item::Scenario(s) => Declaration::Scenario(lower_scenario(s, &mut sink)),
        };
        if sink.errors.len() == before {
            declarations.push(decl);
        }
    }
    if sink.errors.is_empty() {
        Ok(Lowered { declarations, warnings: sink.warnings })
    } else {
        sink.errors.sort_by_key(|d| d.span.byte_start);
        Err(sink.errors)
    }
}

fn string_value<'a>(kv: &'a KeyValue, sink: &mut Sink) -> Option<&'a str> {
    match &kv.value.node {
        Value::Str(s) => Some(s),
        _ => {
            sink.error("E_BAD_VALUE", format!("`{}` expects a string", kv.key.node), &kv.value.span);
            None
        }
    }
}

fn path_value<'a>(kv: &'a KeyValue, sink: &mut Sink) -> Option<&'a str> {
    match &kv.value.node {
        Value::Path(p) => Some(p),
        _ => {
            sink.error("E_BAD_VALUE", format!("`{}` expects an identifier", kv.key.node), &kv.value.span);
            None
        }
    }
}

fn lower_asset(block: &AssetBlock, sink: &mut Sink) -> AssetDecl {
    let mut decl = AssetDecl {
        id: block.id.node.clone(),
        display_name: String::new(),
        kind: None,
        parent: None,
        notes: String::new(),
        span: Some(block.span.clone()),
    };
    for kv in &block.entries {
        match kv.key.node.as_str() {
            "kind" => {
                if let Some(p) = path_value(kv, sink) {
                    match p.parse::<AssetKind>() {
                        Ok(k) => decl.kind = Some(k),
                        Err(()) => sink.error(
                            "E_BAD_VALUE",
                            format!("unknown asset kind `{p}` (human, organizational or environmental)"),
                            &kv.value.span,
                        ),
                    }
                }
            }
            "name" => decl.display_name = string_value(kv, sink).unwrap_or_default().to_string(),
            "notes" => decl.notes = string_value(kv, sink).unwrap_or_default().to_string(),
            "parent" => decl.parent = path_value(kv, sink).map(str::to_string),
            other => sink.error("E_UNKNOWN_KEY", format!("unknown asset key `{other}`"), &kv.key.span),
        }
    }
    // A root asset named `<kind>.<...>` takes its kind from the first segment.
    if decl.kind.is_none() && decl.parent.is_none() {
        decl.kind = decl.id.split('.').next().and_then(|s| s.parse().ok());
    }
    decl
}

fn lower_exposure(block: &ExposureBlock, sink: &mut Sink) -> ExposureDecl {
    let mut vector = String::new();
    for kv in &block.entries {
        match kv.key.node.as_str() {
            "vector" => vector = string_value(kv, sink).unwrap_or_default().to_string(),
            other => sink.error("E_UNKNOWN_KEY", format!("unknown exposure key `{other}`"), &kv.key.span),
        }
    }
    ExposureDecl {
        exposure: ExposureMode { id: block.id.node.clone(), asset_id: block.asset.node.clone(), vector },
        span: Some(block.span.clone()),
    }
}

fn lower_scenario(block: &ScenarioBlock, sink: &mut Sink) -> ScenarioDecl {
    let template = match block.twin.node.parse::<TwinKind>() {
        Ok(kind) => Some(kind.template()),
        Err(_) => {
            let known: Vec<_> = TwinKind::ALL.iter().map(|k| k.as_str()).collect();
            sink.error(
                "E_UNKNOWN_TWIN",
                format!("unknown twin `{}` (known: {})", block.twin.node, known.join(", ")),
                &block.twin.span,
            );
            None
        }
    };

    let mut params = ParameterSpace::new();
    for entry in block.params.iter().flatten() {
        let Some(dist) = lower_dist(&entry.dist, sink) else { continue };
        if let Some(t) = template {
            match t.dim(&entry.name.node) {
                Some(expected) if expected != dist.dimension => sink.error(
                    "E_DIM_MISMATCH",
                    format!(
                        "`{}` is {} but the distribution is {}",
                        entry.name.node,
                        expected.as_str(),
                        dist.dimension.as_str()
                    ),
                    &entry.dist.span,
                ),
                Some(_) => {}
                None => sink.warnings.push(Diagnostic::warning(
                    "W_UNUSED_PARAM",
                    format!("`{}` is not read by twin `{}`", entry.name.node, t.kind),
                    entry.name.span.clone(),
                )),
            }
        }
        params = params.with(&entry.name.node, dist);
    }

    let injections = block.injections.iter().filter_map(|inj| lower_injection(inj, template, sink)).collect();

    let mut label_rules = Vec::new();
    for label in &block.labels {
        let severity = match label.severity.as_ref().map(|s| (s.node.as_str(), &s.span)) {
            None | Some(("violation", _)) => Severity::Violation,
            Some(("info", _)) => Severity::Info,
            Some((other, span)) => {
                sink.error("E_BAD_VALUE", format!("unknown label severity `{other}` (info or violation)"), span);
                Severity::Violation
            }
        };
        if let Some(predicate) = lower_predicate(&label.predicate.node, template, sink) {
            label_rules.push(LabelRule { name: label.name.node.clone(), predicate, severity });
        }
    }

    ScenarioDecl {
        scenario: HazardScenario {
            id: block.id.node.clone(),
            exposure_id: block.exposure.node.clone(),
            cause: block.cause.as_ref().map(|c| c.node.clone()).unwrap_or_default(),
            twin: block.twin.node.clone(),
            params,
            injections,
            label_rules,
        },
        span: Some(block.span.clone()),
    }
}

fn lower_dist(dist: &Spanned<DistExpr>, sink: &mut Sink) -> Option<DistributionSpec> {
    let spec = match &dist.node {
        DistExpr::Constant(q) => DistributionSpec::constant(q.dimension(), q.canonical()),
        DistExpr::Call { func, args } => {
            let arity_ok = match func.node.as_str() {
                "uniform" => args.len() == 2,
                "normal" => args.len() == 4,
                "choice" => !args.is_empty(),
                other => {
                    sink.error("E_BAD_DIST", format!("unknown distribution `{other}` (uniform, normal or choice)"), &func.span);
                    return None;
                }
            };
            if !arity_ok {
                let want = if func.node == "uniform" { "2 arguments (lo, hi)" } else if func.node == "normal" { "4 arguments (mu, sigma, lo, hi)" } else { "at least one value" };
                sink.error("E_BAD_DIST", format!("`{}` takes {want}, got {}", func.node, args.len()), &dist.span);
                return None;
            }
            let dimension = args[0].value.node.dimension();
            let mut ok = true;
            for arg in args {
                if arg.value.node.dimension() != dimension {
                    sink.error(
                        "E_DIM_MISMATCH",
                        format!(
                            "argument is {} but the first argument is {}",
                            arg.value.node.dimension().as_str(),
                            dimension.as_str()
                        ),
                        &arg.value.span,
                    );
                    ok = false;
                }
                if let Some(w) = &arg.weight {
                    if func.node != "choice" {
                        sink.error("E_BAD_DIST", "only `choice` accepts weights", &w.span);
                        ok = false;
                    } else if w.node.dimension() != Dimension::Dimensionless {
                        sink.error("E_DIM_MISMATCH", "choice weights must be bare numbers", &w.span);
                        ok = false;
                    }
                }
            }
            if !ok {
                return None;
            }
            let v: Vec<f64> = args.iter().map(|a| a.value.node.canonical()).collect();
            match func.node.as_str() {
                "uniform" => DistributionSpec::uniform(dimension, v[0], v[1]),
                "normal" => DistributionSpec::normal(dimension, v[0], v[1], v[2], v[3]),
                _ => {
                    let weighted = args.iter().filter(|a| a.weight.is_some()).count();
                    if weighted != 0 && weighted != args.len() {
                        sink.error("E_BAD_DIST", "either every choice value has a weight or none does", &dist.span);
                        return None;
                    }
                    let weights =
                        (weighted > 0).then(|| args.iter().map(|a| a.weight.as_ref().map_or(0.0, |w| w.node.magnitude)).collect());
                    DistributionSpec::choice(dimension, v, weights)
                }
            }
        }
    };
    match spec.check() {
        Ok(()) => Some(spec),
        Err(message) => {
            sink.error("E_BAD_DIST", message, &dist.span);
            None
        }
    }
}

fn injection_keys(kind: InjectionKind) -> &'static [(&'static str, Dimension, bool)] {
    match kind {
        InjectionKind::GripperOffset => &[("sigma", Dimension::Length, true)],
        InjectionKind::Occlusion => &[
            ("prob", Dimension::Dimensionless, true),
            ("box_w", Dimension::Length, false),
            ("box_d", Dimension::Length, false),
            ("box_h", Dimension::Length, false),
        ],
        InjectionKind::CoolingFailure => &[("prob", Dimension::Dimensionless, true)],
    }
}

fn lower_injection(inj: &InjectionExpr, template: Option<&TwinTemplate>, sink: &mut Sink) -> Option<InjectionSpec> {
    let Some(kind) = InjectionKind::from_name(&inj.name.node) else {
        let known: Vec<_> = InjectionKind::ALL.iter().map(|k| k.as_str()).collect();
        sink.error(
            "E_UNKNOWN_INJECTION",
            format!("unknown injection `{}` (known: {})", inj.name.node, known.join(", ")),
            &inj.name.span,
        );
        return None;
    };
    let keys = injection_keys(kind);
    let before = sink.errors.len();
    for arg in &inj.args {
        match keys.iter().find(|(k, _, _)| *k == arg.key.node) {
            None => sink.error("E_UNKNOWN_KEY", format!("`{kind}` has no argument `{}`", arg.key.node), &arg.key.span),
            Some((_, dim, _)) if arg.value.node.dimension() != *dim => sink.error(
                "E_DIM_MISMATCH",
                format!("`{}` is {} but got {}", arg.key.node, dim.as_str(), arg.value.node.dimension().as_str()),
                &arg.value.span,
            ),
            Some(_) => {}
        }
    }
    for (key, _, required) in keys {
        if *required && !inj.args.iter().any(|a| a.key.node == *key) {
            sink.error("E_BAD_INJECTION", format!("`{kind}` requires `{key}`"), &inj.span);
        }
    }
    if sink.errors.len() != before {
        return None;
    }
    let get = |key: &str| inj.args.iter().find(|a| a.key.node == key).map(|a| a.value.node.canonical());
    let spec = match kind {
        InjectionKind::GripperOffset => InjectionSpec::GripperOffset { sigma: get("sigma")? },
        InjectionKind::Occlusion => InjectionSpec::Occlusion {
            prob: get("prob")?,
            size: [
                get("box_w").unwrap_or(DEFAULT_OCCLUDER_SIZE[0]),
                get("box_d").unwrap_or(DEFAULT_OCCLUDER_SIZE[1]),
                get("box_h").unwrap_or(DEFAULT_OCCLUDER_SIZE[2]),
            ],
        },
        InjectionKind::CoolingFailure => InjectionSpec::CoolingFailure { prob: get("prob")? },
    };
    if let Err(message) = spec.check() {
        sink.error("E_BAD_INJECTION", message, &inj.span);
        return None;
    }
    if let Some(t) = template {
        if !t.accepts(kind) {
            sink.error(
                "E_INCOMPATIBLE_INJECTION",
                format!("`{kind}` cannot be applied to twin `{}`", t.kind),
                &inj.name.span,
            );
            return None;
        }
    }
    Some(spec)
}

fn lower_predicate(p: &PredExpr, template: Option<&TwinTemplate>, sink: &mut Sink) -> Option<Predicate> {
    Some(match p {
        PredExpr::Compare { metric, op, value } => {
            let q: &Quantity = &value.node;
            if let Some(t) = template {
                match t.metric(&metric.node) {
                    None => {
                        let known: Vec<_> = t.emitted_metrics.iter().map(|(m, _)| *m).collect();
                        sink.error(
                            "E_UNKNOWN_METRIC",
                            format!("twin `{}` emits no metric `{}` (known: {})", t.kind, metric.node, known.join(", ")),
                            &metric.span,
                        );
                        return None;
                    }
                    Some(dim) if dim != q.dimension() => {
                        sink.error(
                            "E_DIM_MISMATCH",
                            format!(
                                "`{}` is {} but is compared to a {} quantity",
                                metric.node,
                                dim.as_str(),
                                q.dimension().as_str()
                            ),
                            &value.span,
                        );
                        return None;
                    }
                    Some(_) => {}
                }
            }
            Predicate::compare(&metric.node, *op, q.canonical(), q.dimension())
        }
        PredExpr::And(a, b) => {
            let (a, b) = (lower_predicate(&a.node, template, sink), lower_predicate(&b.node, template, sink));
            Predicate::And(Box::new(a?), Box::new(b?))
        }
        PredExpr::Or(a, b) => {
            let (a, b) = (lower_predicate(&a.node, template, sink), lower_predicate(&b.node, template, sink));
            Predicate::Or(Box::new(a?), Box::new(b?))
        }
        PredExpr::Not(inner) => Predicate::Not(Box::new(lower_predicate(&inner.node, template, sink)?)),
    })
}
