//! Digital-twin archetypes.
//!
//! Each archetype is analytic: a tabletop with one cylindrical object, a
//! human capsule swept by an actuator segment, and a linear thermal ramp.
//! Templates declare the parameter dimensions they need and the metrics they
//! emit; scenarios are checked against both before generation.

mod geometry;
mod inject;
mod scene;
mod sensor;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::units::Dimension;

pub use geometry::{closest_points, segment_capsule_separation, segment_distance, Aabb, Capsule, Segment, Vec3};
pub use inject::{apply_injection, InjectionKind, InjectionSpec, DEFAULT_OCCLUDER_SIZE};
pub use scene::{
    edge_clearance, exceedance_time, instantiate_scene, metrics, min_separation, temperature_peak, CameraPose,
    PlacedObject, ProximityScene, SceneBody, SceneInstance, Table, TabletopScene, ThermalScene, CHILD_HEIGHT,
    CHILD_RADIUS, CHILD_STANDOFF, LIGHTING_RANGE,
};
pub use sensor::{observe, ObsValue, Observation, PlacementContext, SensorModel, THERMAL_SAMPLE_COUNT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TwinKind {
    TabletopPlacement,
    ProximitySweep,
    ThermalRamp,
}

impl TwinKind {
    pub const ALL: [TwinKind; 3] = [TwinKind::TabletopPlacement, TwinKind::ProximitySweep, TwinKind::ThermalRamp];

    pub fn as_str(self) -> &'static str {
        match self {
            TwinKind::TabletopPlacement => "tabletop_placement",
            TwinKind::ProximitySweep => "proximity_sweep",
            TwinKind::ThermalRamp => "thermal_ramp",
        }
    }

    pub fn template(self) -> &'static TwinTemplate {
        match self {
            TwinKind::TabletopPlacement => &TABLETOP,
            TwinKind::ProximitySweep => &PROXIMITY,
            TwinKind::ThermalRamp => &THERMAL,
        }
    }
}

impl FromStr for TwinKind {
    type Err = TwinError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TwinKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| TwinError::UnknownTwin(s.to_string()))
    }
}

impl fmt::Display for TwinKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Static description of an archetype.
#[derive(Debug)]
pub struct TwinTemplate {
    pub kind: TwinKind,
    pub required_dims: &'static [(&'static str, Dimension)],
    pub emitted_metrics: &'static [(&'static str, Dimension)],
    pub compatible_injections: &'static [InjectionKind],
}

impl TwinTemplate {
    pub fn dim(&self, name: &str) -> Option<Dimension> {
        self.required_dims.iter().find(|(n, _)| *n == name).map(|(_, d)| *d)
    }

    pub fn metric(&self, name: &str) -> Option<Dimension> {
        self.emitted_metrics.iter().find(|(n, _)| *n == name).map(|(_, d)| *d)
    }

    pub fn accepts(&self, injection: InjectionKind) -> bool {
        self.compatible_injections.contains(&injection)
    }
}

/// Table footprint is sampled as fractions `place_u`, `place_v` of the
/// feasible center range `[r, W - r] x [r, D - r]`.
static TABLETOP: TwinTemplate = TwinTemplate {
    kind: TwinKind::TabletopPlacement,
    required_dims: &[
        ("table_w", Dimension::Length),
        ("table_d", Dimension::Length),
        ("table_h", Dimension::Length),
        ("object_radius", Dimension::Length),
        ("object_height", Dimension::Length),
        ("object_mass", Dimension::Mass),
        ("place_u", Dimension::Dimensionless),
        ("place_v", Dimension::Dimensionless),
        ("lighting", Dimension::Dimensionless),
    ],
    emitted_metrics: &[("clearance", Dimension::Length), ("detected", Dimension::Dimensionless)],
    compatible_injections: &[InjectionKind::GripperOffset, InjectionKind::Occlusion],
};

static PROXIMITY: TwinTemplate = TwinTemplate {
    kind: TwinKind::ProximitySweep,
    required_dims: &[
        ("human_x", Dimension::Length),
        ("human_y", Dimension::Length),
        ("human_height", Dimension::Length),
        ("human_radius", Dimension::Length),
        ("arm_x0", Dimension::Length),
        ("arm_x1", Dimension::Length),
        ("arm_y", Dimension::Length),
        ("arm_z", Dimension::Length),
        ("lighting", Dimension::Dimensionless),
    ],
    emitted_metrics: &[("separation", Dimension::Length)],
    compatible_injections: &[InjectionKind::Occlusion],
};

static THERMAL: TwinTemplate = TwinTemplate {
    kind: TwinKind::ThermalRamp,
    required_dims: &[
        ("t0", Dimension::Temperature),
        ("heat_rate", Dimension::HeatRate),
        ("cooling_rate", Dimension::HeatRate),
        ("threshold", Dimension::Temperature),
        ("horizon", Dimension::Time),
    ],
    emitted_metrics: &[("temperature_peak", Dimension::Temperature), ("exceedance_time", Dimension::Time)],
    compatible_injections: &[InjectionKind::CoolingFailure],
};

/// Canonical values bound to named dimensions, in sampling order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamAssignment {
    entries: Vec<(String, Dimension, f64)>,
}

impl ParamAssignment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: &str, dimension: Dimension, value: f64) -> Self {
        self.push(name, dimension, value);
        self
    }

    /// Binds `name`, replacing an earlier binding of the same name.
    pub fn push(&mut self, name: &str, dimension: Dimension, value: f64) {
        match self.entries.iter_mut().find(|(n, _, _)| n == name) {
            Some(entry) => *entry = (name.to_string(), dimension, value),
            None => self.entries.push((name.to_string(), dimension, value)),
        }
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.entries.iter().find(|(n, _, _)| n == name).map(|(_, _, v)| *v)
    }

    pub fn dimension(&self, name: &str) -> Option<Dimension> {
        self.entries.iter().find(|(n, _, _)| n == name).map(|(_, d, _)| *d)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, Dimension, f64)> {
        self.entries.iter().map(|(n, d, v)| (n.as_str(), *d, *v))
    }

    pub fn to_map(&self) -> BTreeMap<String, f64> {
        self.entries.iter().map(|(n, _, v)| (n.clone(), *v)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TwinError {
    #[error("unknown twin archetype `{0}`")]
    UnknownTwin(String),
    #[error("dimension `{0}` has no bound parameter")]
    UnboundDim(String),
    #[error("parameter `{name}` must be {expected}, got {found}")]
    DimMismatch { name: String, expected: Dimension, found: Dimension },
    #[error("infeasible scene: {0}")]
    Infeasible(String),
    #[error("{operation} is not defined for {found} scenes")]
    WrongArchetype { operation: &'static str, found: TwinKind },
    #[error("injection {injection} cannot be applied to {twin}")]
    IncompatibleInjection { injection: InjectionKind, twin: TwinKind },
    #[error("placement offset sampling exhausted its rejection budget")]
    RejectionOverflow,
}

impl TwinError {
    pub fn code(&self) -> &'static str {
        match self {
            TwinError::UnknownTwin(_) => "E_UNKNOWN_TWIN",
            TwinError::UnboundDim(_) => "E_UNBOUND_DIM",
            TwinError::DimMismatch { .. } => "E_DIM_MISMATCH",
            TwinError::Infeasible(_) => "E_INFEASIBLE",
            TwinError::WrongArchetype { .. } => "E_WRONG_ARCHETYPE",
            TwinError::IncompatibleInjection { .. } => "E_INCOMPATIBLE_INJECTION",
            TwinError::RejectionOverflow => "E_REJECTION_OVERFLOW",
        }
    }
}
