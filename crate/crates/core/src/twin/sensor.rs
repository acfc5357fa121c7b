//! Observation model: what the robot's sensors report about a scene.

use serde::{Deserialize, Serialize};

use super::scene::{edge_clearance, min_separation, SceneBody, SceneInstance};
use crate::canon::Real;
use crate::genvar::RngStream;

/// Evenly spaced temperature readings over `[0, horizon]`.
pub const THERMAL_SAMPLE_COUNT: usize = 11;

/// Range noise is `normal(0, clearance_noise_sigma / lighting)` and applies to
/// both clearance and separation readings; temperature noise ignores lighting.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SensorModel {
    pub clearance_noise_sigma: f64,
    pub temperature_noise_sigma: f64,
}

impl SensorModel {
    pub fn noiseless() -> Self {
        Self::default()
    }

    pub fn with_clearance_sigma(sigma: f64) -> Self {
        SensorModel { clearance_noise_sigma: sigma, temperature_noise_sigma: 0.0 }
    }

    pub fn effective_sigma(&self, lighting: f64) -> f64 {
        self.clearance_noise_sigma / lighting
    }
}

/// Scene quantities known to the planner without sensing (table and object
/// geometry), carried alongside the sensed values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlacementContext {
    pub table_w: f64,
    pub table_d: f64,
    pub object_radius: f64,
    pub object_mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub lighting: f64,
    pub detected: Option<bool>,
    pub observed_clearance: Option<f64>,
    pub observed_separation: Option<f64>,
    pub temperature_samples: Option<Vec<(f64, f64)>>,
    pub placement: Option<PlacementContext>,
}

/// A flattened observation field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ObsValue {
    Scalar(Real),
    Series(Vec<[Real; 2]>),
}

impl ObsValue {
    pub fn as_scalar(&self) -> Option<f64> {
        match self {
            ObsValue::Scalar(r) => Some(r.0),
            ObsValue::Series(_) => None,
        }
    }
}

impl Observation {
    /// Named fields in their fixed order; absent fields are omitted.
    pub fn fields(&self) -> Vec<(&'static str, ObsValue)> {
        let scalar = |v: f64| ObsValue::Scalar(Real(v));
        let mut out = Vec::new();
        if let Some(c) = self.observed_clearance {
            out.push(("observed_clearance", scalar(c)));
        }
        if let Some(s) = self.observed_separation {
            out.push(("observed_separation", scalar(s)));
        }
        if let Some(samples) = &self.temperature_samples {
            out.push((
                "temperature_samples",
                ObsValue::Series(samples.iter().map(|&(t, temp)| [Real(t), Real(temp)]).collect()),
            ));
        }
        if let Some(d) = self.detected {
            out.push(("detected", scalar(if d { 1.0 } else { 0.0 })));
        }
        out.push(("lighting", scalar(self.lighting)));
        if let Some(p) = self.placement {
            out.push(("table_w", scalar(p.table_w)));
            out.push(("table_d", scalar(p.table_d)));
            out.push(("object_radius", scalar(p.object_radius)));
            out.push(("object_mass", scalar(p.object_mass)));
        }
        out
    }
}

/// Produces the sensed view of `scene`. Draw order: the range reading
/// first, then temperature samples in time order. Zero-sigma channels draw
/// nothing.
pub fn observe(scene: &SceneInstance, sensor: &SensorModel, rng: &mut RngStream) -> Observation {
    let sigma = sensor.effective_sigma(scene.lighting);
    let mut noisy = |exact: f64| if sigma > 0.0 { exact + rng.next_normal(0.0, sigma) } else { exact };
    let mut obs = Observation {
        lighting: scene.lighting,
        detected: None,
        observed_clearance: None,
        observed_separation: None,
        temperature_samples: None,
        placement: None,
    };
    match &scene.body {
        SceneBody::Tabletop(t) => {
            obs.observed_clearance = Some(noisy(edge_clearance(scene).expect("tabletop scene")));
            obs.detected = Some(t.human_detected());
            obs.placement = Some(PlacementContext {
                table_w: t.table.width,
                table_d: t.table.depth,
                object_radius: t.object.radius,
                object_mass: t.object.mass,
            });
        }
        SceneBody::Proximity(p) => {
            obs.observed_separation = Some(noisy(min_separation(scene).expect("proximity scene")));
            obs.detected = Some(p.human_detected());
        }
        SceneBody::Thermal(th) => {
            let temp_sigma = sensor.temperature_noise_sigma;
            let steps = (THERMAL_SAMPLE_COUNT - 1) as f64;
            let samples = (0..THERMAL_SAMPLE_COUNT)
                .map(|k| {
                    let t = th.horizon * k as f64 / steps;
                    let exact = th.temperature_at(t);
                    let reading = if temp_sigma > 0.0 { exact + rng.next_normal(0.0, temp_sigma) } else { exact };
                    (t, reading)
                })
                .collect();
            obs.temperature_samples = Some(samples);
        }
    }
    obs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genvar::derive_rng;
    use crate::twin::{apply_injection, InjectionSpec, Table, TabletopScene, DEFAULT_OCCLUDER_SIZE};

    fn scene(lighting: f64) -> SceneInstance {
        let table = Table { width: 100.0, depth: 60.0, height: 70.0 };
        let t = TabletopScene::with_center(table, 3.0, 12.0, 350.0, (12.0, 30.0)).unwrap();
        SceneInstance::new("s", 0, lighting, SceneBody::Tabletop(t))
    }

    #[test]
    fn noiseless_reads_exact_clearance() {
        let obs = observe(&scene(1.0), &SensorModel::noiseless(), &mut derive_rng(0, "s", 0));
        assert_eq!(obs.observed_clearance, Some(9.0));
        assert_eq!(obs.detected, Some(true));
    }

    #[test]
    fn noiseless_ignores_stream() {
        let a = observe(&scene(0.7), &SensorModel::noiseless(), &mut derive_rng(0, "s", 0));
        let b = observe(&scene(0.7), &SensorModel::noiseless(), &mut derive_rng(99, "other", 5));
        assert_eq!(a, b);
    }

    #[test]
    fn noise_scales_with_inverse_lighting() {
        let s = scene(0.5);
        let sensor = SensorModel::with_clearance_sigma(1.0);
        assert_eq!(sensor.effective_sigma(0.5), 2.0);
        let mut rng = derive_rng(0, "noise", 0);
        let n = 100_000;
        let draws: Vec<f64> = (0..n).map(|_| observe(&s, &sensor, &mut rng).observed_clearance.unwrap()).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let std = (draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        assert!((1.98..=2.02).contains(&std), "std {std}");
    }

    #[test]
    fn occluded_human_not_detected() {
        let spec = InjectionSpec::Occlusion { prob: 1.0, size: DEFAULT_OCCLUDER_SIZE };
        let mut rng = derive_rng(0, "s", 0);
        let occluded = apply_injection(scene(1.0), &spec, &mut rng).unwrap();
        assert!(occluded.tabletop().unwrap().human.is_some());
        let obs = observe(&occluded, &SensorModel::noiseless(), &mut rng);
        assert_eq!(obs.detected, Some(false));
    }

    #[test]
    fn field_order_is_fixed() {
        let obs = observe(&scene(1.0), &SensorModel::noiseless(), &mut derive_rng(0, "s", 0));
        let names: Vec<_> = obs.fields().into_iter().map(|(n, _)| n).collect();
        assert_eq!(
            names,
            ["observed_clearance", "detected", "lighting", "table_w", "table_d", "object_radius", "object_mass"]
        );
    }
}
