//! Failure-mode injection.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::geometry::{Aabb, Segment};
use super::scene::{SceneBody, SceneInstance};
use super::TwinError;
use crate::genvar::{truncated_normal, RngStream};

/// Occluder edge lengths (cm) used when a source gives none.
pub const DEFAULT_OCCLUDER_SIZE: [f64; 3] = [20.0, 20.0, 20.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InjectionKind {
    GripperOffset,
    Occlusion,
    CoolingFailure,
}

impl InjectionKind {
    pub const ALL: [InjectionKind; 3] = [InjectionKind::GripperOffset, InjectionKind::Occlusion, InjectionKind::CoolingFailure];

    pub fn as_str(self) -> &'static str {
        match self {
            InjectionKind::GripperOffset => "gripper_offset",
            InjectionKind::Occlusion => "occlusion",
            InjectionKind::CoolingFailure => "cooling_failure",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        InjectionKind::ALL.into_iter().find(|k| k.as_str() == name)
    }
}

impl fmt::Display for InjectionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InjectionSpec {
    /// Placement error: per-axis offset from the commanded center, normal
    /// with `sigma` (cm) truncated at three sigma.
    GripperOffset { sigma: f64 },
    /// With probability `prob`, a box of `size` (cm) blocks the camera's
    /// line of sight to the human.
    Occlusion { prob: f64, size: [f64; 3] },
    /// With probability `prob`, the cooling loop stops (`cooling_rate = 0`).
    CoolingFailure { prob: f64 },
}

impl InjectionSpec {
    pub fn kind(&self) -> InjectionKind {
        match self {
            InjectionSpec::GripperOffset { .. } => InjectionKind::GripperOffset,
            InjectionSpec::Occlusion { .. } => InjectionKind::Occlusion,
            InjectionSpec::CoolingFailure { .. } => InjectionKind::CoolingFailure,
        }
    }

    pub fn check(&self) -> Result<(), String> {
        let prob_ok = |p: f64| (0.0..=1.0).contains(&p);
        match self {
            InjectionSpec::GripperOffset { sigma } if !(sigma.is_finite() && *sigma >= 0.0) => {
                Err(format!("gripper_offset sigma must be >= 0, got {sigma}"))
            }
            InjectionSpec::Occlusion { prob, .. } | InjectionSpec::CoolingFailure { prob } if !prob_ok(*prob) => {
                Err(format!("{} prob must lie in [0, 1], got {prob}", self.kind()))
            }
            InjectionSpec::Occlusion { size, .. } if size.iter().any(|s| !(s.is_finite() && *s > 0.0)) => {
                Err("occluder box edges must be positive".into())
            }
            _ => Ok(()),
        }
    }
}

/// Applies one injection. Probabilistic injections always consume one
/// uniform draw; a non-firing draw leaves the scene untouched and untagged.
pub fn apply_injection(
    mut scene: SceneInstance,
    inj: &InjectionSpec,
    rng: &mut RngStream,
) -> Result<SceneInstance, TwinError> {
    let incompatible = |scene: &SceneInstance| TwinError::IncompatibleInjection { injection: inj.kind(), twin: scene.kind() };
    if !scene.kind().template().accepts(inj.kind()) {
        return Err(incompatible(&scene));
    }
    let fired = match (inj, &mut scene.body) {
        (InjectionSpec::GripperOffset { sigma }, SceneBody::Tabletop(t)) => {
            let sigma = *sigma;
            let (dx, dy) = if sigma > 0.0 {
                let bound = 3.0 * sigma;
                let dx = truncated_normal(rng, 0.0, sigma, -bound, bound).map_err(|_| TwinError::RejectionOverflow)?;
                let dy = truncated_normal(rng, 0.0, sigma, -bound, bound).map_err(|_| TwinError::RejectionOverflow)?;
                (dx, dy)
            } else {
                (0.0, 0.0)
            };
            let ((xlo, xhi), (ylo, yhi)) = t.footprint_range();
            let (cx, cy) = t.object.commanded_center;
            t.object.center = ((cx + dx).clamp(xlo, xhi), (cy + dy).clamp(ylo, yhi));
            true
        }
        (InjectionSpec::Occlusion { prob, size }, SceneBody::Tabletop(t)) => {
            let fire = rng.next_unit() < *prob;
            if fire {
                if let Some(human) = t.human {
                    let sight = Segment::new(t.camera().eye, human.centroid());
                    t.occluder = Some(Aabb::centered(sight.midpoint(), *size));
                }
            }
            fire
        }
        (InjectionSpec::Occlusion { prob, size }, SceneBody::Proximity(p)) => {
            let fire = rng.next_unit() < *prob;
            if fire {
                let sight = Segment::new(p.camera().eye, p.human.centroid());
                p.occluder = Some(Aabb::centered(sight.midpoint(), *size));
            }
            fire
        }
        (InjectionSpec::CoolingFailure { prob }, SceneBody::Thermal(th)) => {
            let fire = rng.next_unit() < *prob;
            if fire {
                th.cooling_rate = 0.0;
            }
            fire
        }
        _ => return Err(incompatible(&scene)),
    };
    if fired {
        scene.injections_applied.push(inj.kind().as_str().to_string());
    }
    Ok(scene)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genvar::derive_rng;
    use crate::twin::{edge_clearance, metrics, Table, TabletopScene, ThermalScene};

    fn tabletop(center: (f64, f64)) -> SceneInstance {
        let table = Table { width: 100.0, depth: 60.0, height: 70.0 };
        let t = TabletopScene::with_center(table, 3.0, 12.0, 350.0, center).unwrap();
        SceneInstance::new("s", 0, 1.0, SceneBody::Tabletop(t))
    }

    fn thermal() -> SceneInstance {
        SceneInstance::new(
            "th",
            0,
            1.0,
            SceneBody::Thermal(ThermalScene { t0: 30.0, heat_rate: 0.05, cooling_rate: 0.05, threshold: 80.0, horizon: 3600.0 }),
        )
    }

    #[test]
    fn zero_sigma_offset_only_tags() {
        let before = tabletop((40.0, 20.0));
        let mut rng = derive_rng(0, "s", 0);
        let after = apply_injection(before.clone(), &InjectionSpec::GripperOffset { sigma: 0.0 }, &mut rng).unwrap();
        assert_eq!(after.body, before.body);
        assert_eq!(after.injections_applied, vec!["gripper_offset"]);
    }

    #[test]
    fn offsets_are_bounded_and_clamped() {
        let spec = InjectionSpec::GripperOffset { sigma: 2.0 };
        for i in 0..500 {
            let mut rng = derive_rng(1, "s", i);
            let after = apply_injection(tabletop((50.0, 30.0)), &spec, &mut rng).unwrap();
            let t = after.tabletop().unwrap();
            assert!((t.object.center.0 - 50.0).abs() <= 6.0);
            assert!((t.object.center.1 - 30.0).abs() <= 6.0);
            assert_eq!(t.object.commanded_center, (50.0, 30.0));
        }
        for i in 0..500 {
            let mut rng = derive_rng(2, "s", i);
            let after = apply_injection(tabletop((3.5, 3.5)), &spec, &mut rng).unwrap();
            assert!(edge_clearance(&after).unwrap() >= 0.0);
        }
    }

    #[test]
    fn cooling_failure_certain() {
        let mut rng = derive_rng(0, "th", 0);
        let after = apply_injection(thermal(), &InjectionSpec::CoolingFailure { prob: 1.0 }, &mut rng).unwrap();
        assert_eq!(after.thermal().unwrap().cooling_rate, 0.0);
        assert_eq!(after.injections_applied, vec!["cooling_failure"]);
    }

    #[test]
    fn zero_probability_is_identity() {
        let mut rng = derive_rng(0, "th", 0);
        let before = thermal();
        let after = apply_injection(before.clone(), &InjectionSpec::CoolingFailure { prob: 0.0 }, &mut rng).unwrap();
        assert_eq!(after, before);
        let before = tabletop((50.0, 30.0));
        let spec = InjectionSpec::Occlusion { prob: 0.0, size: DEFAULT_OCCLUDER_SIZE };
        assert_eq!(apply_injection(before.clone(), &spec, &mut rng).unwrap(), before);
    }

    #[test]
    fn certain_occlusion_blocks_detection() {
        let mut rng = derive_rng(0, "s", 0);
        let spec = InjectionSpec::Occlusion { prob: 1.0, size: DEFAULT_OCCLUDER_SIZE };
        let after = apply_injection(tabletop((50.0, 30.0)), &spec, &mut rng).unwrap();
        assert_eq!(metrics(&after)["detected"], 0.0);
        assert_eq!(after.injections_applied, vec!["occlusion"]);
    }

    #[test]
    fn incompatible_pairs_rejected() {
        let mut rng = derive_rng(0, "s", 0);
        let err = apply_injection(thermal(), &InjectionSpec::GripperOffset { sigma: 1.0 }, &mut rng).unwrap_err();
        assert_eq!(err.code(), "E_INCOMPATIBLE_INJECTION");
        let err = apply_injection(tabletop((50.0, 30.0)), &InjectionSpec::CoolingFailure { prob: 1.0 }, &mut rng).unwrap_err();
        assert_eq!(err.code(), "E_INCOMPATIBLE_INJECTION");
    }

    #[test]
    fn spec_ranges() {
        assert!(InjectionSpec::GripperOffset { sigma: -1.0 }.check().is_err());
        assert!(InjectionSpec::CoolingFailure { prob: 1.5 }.check().is_err());
        assert!(InjectionSpec::Occlusion { prob: 0.5, size: [0.0, 1.0, 1.0] }.check().is_err());
        assert!(InjectionSpec::Occlusion { prob: 0.5, size: DEFAULT_OCCLUDER_SIZE }.check().is_ok());
    }
}
