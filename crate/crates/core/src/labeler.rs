//! Ground-truth safety labels.
//!
//! Rules compare exact (noise-free) twin metrics against literal thresholds.
//! Observations never enter labeling, so labels stay ground truth even when
//! the simulated sensor is noisy or occluded.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canon::Real;
use crate::twin::{metrics, SceneBody, SceneInstance, TwinKind};
use crate::units::Dimension;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CmpOp {
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = ">=")]
    Ge,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }

    pub fn apply(self, lhs: f64, rhs: f64) -> bool {
        match self {
            CmpOp::Lt => lhs < rhs,
            CmpOp::Le => lhs <= rhs,
            CmpOp::Gt => lhs > rhs,
            CmpOp::Ge => lhs >= rhs,
        }
    }
}

impl fmt::Display for CmpOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// `metric op threshold`, threshold in the canonical unit of `dimension`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub metric: String,
    pub op: CmpOp,
    pub threshold: f64,
    pub dimension: Dimension,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Predicate {
    Compare(Comparison),
    And(Box<Predicate>, Box<Predicate>),
    Or(Box<Predicate>, Box<Predicate>),
    Not(Box<Predicate>),
}

impl Predicate {
    pub fn compare(metric: &str, op: CmpOp, threshold: f64, dimension: Dimension) -> Self {
        Predicate::Compare(Comparison { metric: metric.to_string(), op, threshold, dimension })
    }

    /// Every comparison in the tree, left to right.
    pub fn comparisons(&self) -> Vec<&Comparison> {
        let mut out = Vec::new();
        self.collect(&mut out);
        out
    }

    fn collect<'a>(&'a self, out: &mut Vec<&'a Comparison>) {
        match self {
            Predicate::Compare(c) => out.push(c),
            Predicate::And(a, b) | Predicate::Or(a, b) => {
                a.collect(out);
                b.collect(out);
            }
            Predicate::Not(p) => p.collect(out),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Info,
    #[default]
    Violation,
}

/// A named label. For `violation` rules the predicate describes the unsafe
/// condition; `info` rules annotate without implying harm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRule {
    pub name: String,
    pub predicate: Predicate,
    pub severity: Severity,
}

impl LabelRule {
    pub fn violation(name: &str, predicate: Predicate) -> Self {
        LabelRule { name: name.to_string(), predicate, severity: Severity::Violation }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LabelError {
    #[error("metric `{0}` is not bound for this scene")]
    UnboundMetric(String),
    #[error("compound predicates carry no margin")]
    Compound,
}

impl LabelError {
    pub fn code(&self) -> &'static str {
        match self {
            LabelError::UnboundMetric(_) => "E_UNBOUND_METRIC",
            LabelError::Compound => "E_COMPOUND",
        }
    }
}

pub type Metrics = BTreeMap<String, f64>;

pub fn evaluate_predicate(p: &Predicate, metrics: &Metrics) -> Result<bool, LabelError> {
    Ok(match p {
        Predicate::Compare(c) => {
            let value = metrics.get(&c.metric).ok_or_else(|| LabelError::UnboundMetric(c.metric.clone()))?;
            c.op.apply(*value, c.threshold)
        }
        Predicate::And(a, b) => {
            // Both sides are evaluated so unbound metrics surface regardless of order.
            let (l, r) = (evaluate_predicate(a, metrics)?, evaluate_predicate(b, metrics)?);
            l && r
        }
        Predicate::Or(a, b) => {
            let (l, r) = (evaluate_predicate(a, metrics)?, evaluate_predicate(b, metrics)?);
            l || r
        }
        Predicate::Not(p) => !evaluate_predicate(p, metrics)?,
    })
}

/// Signed distance to the rule's boundary; positive means safe.
///
/// For a violation rule `m < c` (or `<=`) the margin is `m - c`; for `m > c`
/// (or `>=`) it is `c - m`. Info rules flip the sign so that positive means
/// the predicate holds. On a non-strict comparison the boundary point has
/// margin 0 while the predicate is true.
pub fn compute_margin(p: &Predicate, severity: Severity, metrics: &Metrics) -> Result<f64, LabelError> {
    let Predicate::Compare(c) = p else {
        return Err(LabelError::Compound);
    };
    let m = *metrics.get(&c.metric).ok_or_else(|| LabelError::UnboundMetric(c.metric.clone()))?;
    let toward_unsafe = match c.op {
        CmpOp::Lt | CmpOp::Le => m - c.threshold,
        CmpOp::Gt | CmpOp::Ge => c.threshold - m,
    };
    Ok(match severity {
        Severity::Violation => toward_unsafe,
        Severity::Info => -toward_unsafe,
    })
}

/// Axis-aligned box on the table (or floor) plane, cm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelBox {
    pub entity_id: String,
    pub min: [Real; 2],
    pub max: [Real; 2],
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LabelSet {
    pub flags: BTreeMap<String, u8>,
    /// `None` for compound rules, which carry a flag only.
    pub margins: BTreeMap<String, Option<Real>>,
    pub boxes: Vec<LabelBox>,
}

impl LabelSet {
    pub fn flag(&self, name: &str) -> Option<bool> {
        self.flags.get(name).map(|f| *f == 1)
    }

    pub fn margin(&self, name: &str) -> Option<f64> {
        self.margins.get(name).copied().flatten().map(|r| r.0)
    }
}

fn footprint(scene: &SceneInstance) -> Option<(&'static str, [f64; 2], [f64; 2])> {
    match &scene.body {
        SceneBody::Tabletop(t) => {
            let (x, y) = t.object.center;
            let r = t.object.radius;
            Some(("object", [x - r, y - r], [x + r, y + r]))
        }
        SceneBody::Proximity(p) => {
            let c = p.human.centroid();
            let r = p.human.radius;
            Some(("human", [c.x - r, c.y - r], [c.x + r, c.y + r]))
        }
        SceneBody::Thermal(_) => None,
    }
}

/// Labels one scene from its exact metrics.
pub fn label_scene(scene: &SceneInstance, rules: &[LabelRule]) -> Result<LabelSet, LabelError> {
    let values = metrics(scene);
    let template = scene.kind().template();
    let mut out = LabelSet::default();
    for rule in rules {
        let fired = evaluate_predicate(&rule.predicate, &values)?;
        let margin = match compute_margin(&rule.predicate, rule.severity, &values) {
            Ok(m) => Some(m),
            Err(LabelError::Compound) => None,
            Err(e) => return Err(e),
        };
        out.flags.insert(rule.name.clone(), u8::from(fired));
        out.margins.insert(rule.name.clone(), margin.map(Real));

        let over_lengths = rule
            .predicate
            .comparisons()
            .iter()
            .all(|c| template.metric(&c.metric) == Some(Dimension::Length));
        if fired && over_lengths && scene.kind() != TwinKind::ThermalRamp {
            if let Some((entity, lo, hi)) = footprint(scene) {
                let pad = margin.map_or(0.0, f64::abs);
                out.boxes.push(LabelBox {
                    entity_id: entity.to_string(),
                    min: [Real(lo[0] - pad), Real(lo[1] - pad)],
                    max: [Real(hi[0] + pad), Real(hi[1] + pad)],
                    reason: rule.name.clone(),
                });
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::twin::{apply_injection, InjectionSpec, Table, TabletopScene, ThermalScene};

    fn edge_rule() -> LabelRule {
        LabelRule::violation("edge_violation", Predicate::compare("clearance", CmpOp::Lt, 10.0, Dimension::Length))
    }

    fn clearance(v: f64) -> Metrics {
        Metrics::from([("clearance".to_string(), v)])
    }

    fn tabletop(center: (f64, f64)) -> SceneInstance {
        let table = Table { width: 100.0, depth: 60.0, height: 70.0 };
        let t = TabletopScene::with_center(table, 3.0, 12.0, 350.0, center).unwrap();
        SceneInstance::new("edge_placement", 0, 1.0, SceneBody::Tabletop(t))
    }

    #[test]
    fn edge_rule_boundary_is_safe() {
        let p = &edge_rule().predicate;
        assert!(evaluate_predicate(p, &clearance(9.0)).unwrap());
        assert!(!evaluate_predicate(p, &clearance(10.0)).unwrap());
        let negated = Predicate::Not(Box::new(p.clone()));
        assert!(!evaluate_predicate(&negated, &clearance(9.0)).unwrap());
    }

    #[test]
    fn unbound_metric() {
        let err = evaluate_predicate(&edge_rule().predicate, &Metrics::new()).unwrap_err();
        assert_eq!(err.code(), "E_UNBOUND_METRIC");
    }

    #[test]
    fn margins() {
        let p = &edge_rule().predicate;
        assert_eq!(compute_margin(p, Severity::Violation, &clearance(27.0)).unwrap(), 17.0);
        assert_eq!(compute_margin(p, Severity::Violation, &clearance(2.0)).unwrap(), -8.0);
        assert_eq!(compute_margin(p, Severity::Violation, &clearance(10.0)).unwrap(), 0.0);
        assert_eq!(compute_margin(p, Severity::Info, &clearance(27.0)).unwrap(), -17.0);

        let hot = Predicate::compare("temperature_peak", CmpOp::Gt, 80.0, Dimension::Temperature);
        let m = Metrics::from([("temperature_peak".to_string(), 95.0)]);
        assert_eq!(compute_margin(&hot, Severity::Violation, &m).unwrap(), -15.0);

        let compound = Predicate::And(Box::new(p.clone()), Box::new(p.clone()));
        assert_eq!(compute_margin(&compound, Severity::Violation, &clearance(5.0)).unwrap_err().code(), "E_COMPOUND");
    }

    #[test]
    fn label_safe_center() {
        let labels = label_scene(&tabletop((50.0, 30.0)), &[edge_rule()]).unwrap();
        assert_eq!(labels.flag("edge_violation"), Some(false));
        assert_eq!(labels.margin("edge_violation"), Some(17.0));
        assert!(labels.boxes.is_empty());
    }

    #[test]
    fn label_violation_box() {
        let labels = label_scene(&tabletop((12.0, 30.0)), &[edge_rule()]).unwrap();
        assert_eq!(labels.flag("edge_violation"), Some(true));
        assert_eq!(labels.margin("edge_violation"), Some(-1.0));
        let b = &labels.boxes[0];
        assert_eq!(b.entity_id, "object");
        assert_eq!(b.reason, "edge_violation");
        assert_eq!(b.min, [Real(8.0), Real(26.0)]);
        assert_eq!(b.max, [Real(16.0), Real(34.0)]);
    }

    #[test]
    fn dimensionless_rules_get_no_box() {
        let mut rng = crate::genvar::derive_rng(0, "s", 0);
        let occluded = apply_injection(
            tabletop((12.0, 30.0)),
            &InjectionSpec::Occlusion { prob: 1.0, size: [20.0; 3] },
            &mut rng,
        )
        .unwrap();
        let missed = LabelRule::violation("missed_detection", Predicate::compare("detected", CmpOp::Lt, 1.0, Dimension::Dimensionless));
        let labels = label_scene(&occluded, &[missed, edge_rule()]).unwrap();
        assert_eq!(labels.flag("missed_detection"), Some(true));
        assert_eq!(labels.boxes.len(), 1);
        assert_eq!(labels.boxes[0].reason, "edge_violation");
    }

    #[test]
    fn overheat_after_cooling_failure() {
        let th = ThermalScene { t0: 30.0, heat_rate: 2.0 / 60.0, cooling_rate: 0.0, threshold: 80.0, horizon: 1800.0 };
        let scene = SceneInstance::new("th", 0, 1.0, SceneBody::Thermal(th));
        let overheat = LabelRule::violation("overheat", Predicate::compare("exceedance_time", CmpOp::Le, 1800.0, Dimension::Time));
        let labels = label_scene(&scene, &[overheat]).unwrap();
        assert_eq!(labels.flag("overheat"), Some(true));
        assert!(labels.boxes.is_empty());
    }
}
