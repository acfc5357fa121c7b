use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::geometry::{segment_capsule_separation, Aabb, Capsule, Segment, Vec3};
use super::{ParamAssignment, TwinError, TwinKind, TwinTemplate};

/// Accepted lighting multipliers; sensor noise scales with its inverse.
pub const LIGHTING_RANGE: (f64, f64) = (0.2, 2.0);

/// The child standing at the front edge of the table, used as the detection
/// target for the tabletop camera.
pub const CHILD_STANDOFF: f64 = 30.0;
pub const CHILD_HEIGHT: f64 = 110.0;
pub const CHILD_RADIUS: f64 = 12.0;

const CAMERA_HEIGHT_ABOVE_TABLE: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraPose {
    pub eye: Vec3,
    pub look_at: Vec3,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub width: f64,
    pub depth: f64,
    pub height: f64,
}

/// Cylindrical object on the table plane; coordinates are cm from the
/// table's (0, 0) corner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlacedObject {
    pub radius: f64,
    pub height: f64,
    pub mass: f64,
    pub center: (f64, f64),
    pub commanded_center: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabletopScene {
    pub table: Table,
    pub object: PlacedObject,
    pub occluder: Option<Aabb>,
    pub human: Option<Capsule>,
}

impl TabletopScene {
    /// Places the object with its center at `center`; the footprint must lie
    /// fully on the table.
    pub fn with_center(table: Table, radius: f64, height: f64, mass: f64, center: (f64, f64)) -> Result<Self, TwinError> {
        check_table(&table, radius, height, mass)?;
        let (x, y) = center;
        let ((xlo, xhi), (ylo, yhi)) = footprint_range(&table, radius);
        if !(xlo..=xhi).contains(&x) || !(ylo..=yhi).contains(&y) {
            return Err(TwinError::Infeasible(format!(
                "object footprint at ({x}, {y}) with radius {radius} leaves the {}x{} table",
                table.width, table.depth
            )));
        }
        Ok(TabletopScene {
            table,
            object: PlacedObject { radius, height, mass, center, commanded_center: center },
            occluder: None,
            human: Some(default_child(&table)),
        })
    }

    /// Feasible center ranges `([r, W - r], [r, D - r])`.
    pub fn footprint_range(&self) -> ((f64, f64), (f64, f64)) {
        footprint_range(&self.table, self.object.radius)
    }

    pub fn camera(&self) -> CameraPose {
        let t = &self.table;
        CameraPose {
            eye: Vec3::new(t.width / 2.0, t.depth / 2.0, t.height + CAMERA_HEIGHT_ABOVE_TABLE),
            look_at: Vec3::new(t.width / 2.0, t.depth / 2.0 - CAMERA_HEIGHT_ABOVE_TABLE, t.height),
        }
    }

    /// Whether the camera has a clear line to the human centroid.
    pub fn human_detected(&self) -> bool {
        detection(self.camera().eye, self.human.as_ref(), self.occluder.as_ref())
    }
}

fn footprint_range(table: &Table, r: f64) -> ((f64, f64), (f64, f64)) {
    ((r, table.width - r), (r, table.depth - r))
}

fn default_child(table: &Table) -> Capsule {
    let x = table.width / 2.0;
    let y = -CHILD_STANDOFF;
    Capsule {
        p0: Vec3::new(x, y, CHILD_RADIUS),
        p1: Vec3::new(x, y, CHILD_HEIGHT - CHILD_RADIUS),
        radius: CHILD_RADIUS,
    }
}

fn check_table(table: &Table, radius: f64, height: f64, mass: f64) -> Result<(), TwinError> {
    let positive = [table.width, table.depth, table.height, radius, height];
    if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(TwinError::Infeasible("table and object dimensions must be positive".into()));
    }
    if !(mass.is_finite() && mass >= 0.0) {
        return Err(TwinError::Infeasible(format!("object mass must be non-negative, got {mass}")));
    }
    if 2.0 * radius > table.width.min(table.depth) {
        return Err(TwinError::Infeasible(format!(
            "object radius {radius} admits no footprint on a {}x{} table",
            table.width, table.depth
        )));
    }
    Ok(())
}

fn detection(eye: Vec3, human: Option<&Capsule>, occluder: Option<&Aabb>) -> bool {
    match human {
        None => false,
        Some(h) => {
            let sight = Segment::new(eye, h.centroid());
            !occluder.is_some_and(|b| b.intersects_segment(&sight))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProximityScene {
    pub human: Capsule,
    pub actuator: Segment,
    pub occluder: Option<Aabb>,
}

impl ProximityScene {
    pub const CAMERA: CameraPose = CameraPose {
        eye: Vec3::new(0.0, 0.0, 200.0),
        look_at: Vec3::new(0.0, 100.0, 100.0),
    };

    pub fn camera(&self) -> CameraPose {
        Self::CAMERA
    }

    pub fn human_detected(&self) -> bool {
        detection(Self::CAMERA.eye, Some(&self.human), self.occluder.as_ref())
    }
}

/// `T(t) = t0 + (heat_rate - cooling_rate) * t` on `[0, horizon]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalScene {
    pub t0: f64,
    pub heat_rate: f64,
    pub cooling_rate: f64,
    pub threshold: f64,
    pub horizon: f64,
}

impl ThermalScene {
    pub fn net_rate(&self) -> f64 {
        self.heat_rate - self.cooling_rate
    }

    pub fn temperature_at(&self, t: f64) -> f64 {
        self.t0 + self.net_rate() * t
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "archetype", rename_all = "snake_case")]
pub enum SceneBody {
    Tabletop(TabletopScene),
    Proximity(ProximityScene),
    Thermal(ThermalScene),
}

/// One concrete twin state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneInstance {
    pub scenario_id: String,
    pub variation_index: u64,
    pub lighting: f64,
    pub body: SceneBody,
    pub injections_applied: Vec<String>,
}

impl SceneInstance {
    pub fn new(scenario_id: &str, variation_index: u64, lighting: f64, body: SceneBody) -> Self {
        SceneInstance {
            scenario_id: scenario_id.to_string(),
            variation_index,
            lighting,
            body,
            injections_applied: Vec::new(),
        }
    }

    pub fn kind(&self) -> TwinKind {
        match self.body {
            SceneBody::Tabletop(_) => TwinKind::TabletopPlacement,
            SceneBody::Proximity(_) => TwinKind::ProximitySweep,
            SceneBody::Thermal(_) => TwinKind::ThermalRamp,
        }
    }

    pub fn tabletop(&self) -> Option<&TabletopScene> {
        match &self.body {
            SceneBody::Tabletop(t) => Some(t),
            _ => None,
        }
    }

    pub fn thermal(&self) -> Option<&ThermalScene> {
        match &self.body {
            SceneBody::Thermal(t) => Some(t),
            _ => None,
        }
    }
}

fn bound(template: &TwinTemplate, params: &ParamAssignment, name: &str) -> Result<f64, TwinError> {
    let expected = template.dim(name).expect("template dimension");
    let value = params.get(name).ok_or_else(|| TwinError::UnboundDim(name.to_string()))?;
    let found = params.dimension(name).unwrap_or(expected);
    if found != expected {
        return Err(TwinError::DimMismatch { name: name.to_string(), expected, found });
    }
    Ok(value)
}

fn check_lighting(lighting: f64) -> Result<(), TwinError> {
    let (lo, hi) = LIGHTING_RANGE;
    if (lo..=hi).contains(&lighting) {
        Ok(())
    } else {
        Err(TwinError::Infeasible(format!("lighting {lighting} outside [{lo}, {hi}]")))
    }
}

fn check_fraction(name: &str, v: f64) -> Result<(), TwinError> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(TwinError::Infeasible(format!("{name} = {v} is not a fraction in [0, 1]")))
    }
}

/// Builds the pre-injection scene from bound parameters.
pub fn instantiate_scene(
    template: &TwinTemplate,
    params: &ParamAssignment,
    scenario_id: &str,
    index: u64,
) -> Result<SceneInstance, TwinError> {
    for (name, _) in template.required_dims {
        bound(template, params, name)?;
    }
    let get = |name: &str| bound(template, params, name);
    match template.kind {
        TwinKind::TabletopPlacement => {
            let table = Table { width: get("table_w")?, depth: get("table_d")?, height: get("table_h")? };
            let radius = get("object_radius")?;
            let (u, v) = (get("place_u")?, get("place_v")?);
            let lighting = get("lighting")?;
            check_table(&table, radius, get("object_height")?, get("object_mass")?)?;
            check_fraction("place_u", u)?;
            check_fraction("place_v", v)?;
            check_lighting(lighting)?;
            let ((xlo, xhi), (ylo, yhi)) = footprint_range(&table, radius);
            let center = (xlo + u * (xhi - xlo), ylo + v * (yhi - ylo));
            let scene = TabletopScene::with_center(table, radius, get("object_height")?, get("object_mass")?, center)?;
            Ok(SceneInstance::new(scenario_id, index, lighting, SceneBody::Tabletop(scene)))
        }
        TwinKind::ProximitySweep => {
            let (hx, hy) = (get("human_x")?, get("human_y")?);
            let (height, radius) = (get("human_height")?, get("human_radius")?);
            let lighting = get("lighting")?;
            if !(radius > 0.0 && height >= 2.0 * radius) {
                return Err(TwinError::Infeasible(format!(
                    "human capsule needs radius > 0 and height >= 2 * radius, got r={radius} h={height}"
                )));
            }
            check_lighting(lighting)?;
            let (y, z) = (get("arm_y")?, get("arm_z")?);
            let scene = ProximityScene {
                human: Capsule {
                    p0: Vec3::new(hx, hy, radius),
                    p1: Vec3::new(hx, hy, height - radius),
                    radius,
                },
                actuator: Segment::new(Vec3::new(get("arm_x0")?, y, z), Vec3::new(get("arm_x1")?, y, z)),
                occluder: None,
            };
            Ok(SceneInstance::new(scenario_id, index, lighting, SceneBody::Proximity(scene)))
        }
        TwinKind::ThermalRamp => {
            let scene = ThermalScene {
                t0: get("t0")?,
                heat_rate: get("heat_rate")?,
                cooling_rate: get("cooling_rate")?,
                threshold: get("threshold")?,
                horizon: get("horizon")?,
            };
            if scene.heat_rate < 0.0 || scene.cooling_rate < 0.0 {
                return Err(TwinError::Infeasible("heating and cooling rates must be non-negative".into()));
            }
            if !(scene.horizon.is_finite() && scene.horizon >= 0.0) {
                return Err(TwinError::Infeasible(format!("horizon {} must be finite and >= 0", scene.horizon)));
            }
            Ok(SceneInstance::new(scenario_id, index, 1.0, SceneBody::Thermal(scene)))
        }
    }
}

/// Signed distance from the object footprint outline to the nearest table
/// edge: `min(x, W - x, y, D - y) - r`.
pub fn edge_clearance(scene: &SceneInstance) -> Result<f64, TwinError> {
    let t = scene.tabletop().ok_or(TwinError::WrongArchetype {
        operation: "edge_clearance",
        found: scene.kind(),
    })?;
    let (x, y) = t.object.center;
    let nearest = x.min(t.table.width - x).min(y).min(t.table.depth - y);
    Ok(nearest - t.object.radius)
}

/// Actuator-to-capsule-surface distance; negative on penetration.
pub fn min_separation(scene: &SceneInstance) -> Result<f64, TwinError> {
    match &scene.body {
        SceneBody::Proximity(p) => Ok(segment_capsule_separation(&p.actuator, &p.human)),
        _ => Err(TwinError::WrongArchetype { operation: "min_separation", found: scene.kind() }),
    }
}

/// First time on `[0, horizon]` at which the threshold is reached.
pub fn exceedance_time(scene: &ThermalScene) -> Option<f64> {
    if scene.t0 >= scene.threshold {
        return Some(0.0);
    }
    let net = scene.net_rate();
    if net <= 0.0 {
        return None;
    }
    let t = (scene.threshold - scene.t0) / net;
    (t <= scene.horizon).then_some(t)
}

/// Maximum temperature reached on `[0, horizon]`.
pub fn temperature_peak(scene: &ThermalScene) -> f64 {
    scene.t0 + scene.net_rate().max(0.0) * scene.horizon
}

/// Exact metric values emitted by the scene's archetype. A thermal scene that
/// never reaches its threshold reports `exceedance_time = +inf`.
pub fn metrics(scene: &SceneInstance) -> BTreeMap<String, f64> {
    let mut out = BTreeMap::new();
    match &scene.body {
        SceneBody::Tabletop(t) => {
            out.insert("clearance".to_string(), edge_clearance(scene).expect("tabletop scene"));
            out.insert("detected".to_string(), if t.human_detected() { 1.0 } else { 0.0 });
        }
        SceneBody::Proximity(_) => {
            out.insert("separation".to_string(), min_separation(scene).expect("proximity scene"));
        }
        SceneBody::Thermal(th) => {
            out.insert("temperature_peak".to_string(), temperature_peak(th));
            out.insert("exceedance_time".to_string(), exceedance_time(th).unwrap_or(f64::INFINITY));
        }
    }
    out
}
