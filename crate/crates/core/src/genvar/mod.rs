//! Controlled variation generation.
//!
//! Variation `i` of scenario `s` under master seed `m` draws from
//! `derive_rng(m, s, i)` in a fixed order: parameters in declaration order,
//! then each injection in declaration order, then sensor noise. Because the
//! stream is keyed per index, results do not depend on scheduling.

mod rng;
mod sample;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ontology::Registry;
use crate::twin::{apply_injection, instantiate_scene, observe, Observation, SceneInstance, SensorModel, TwinError};

pub use rng::{derive_rng, fnv1a64, splitmix64_next, RngStream, StreamOrigin};
pub use sample::{sample_params, truncated_normal, DistForm, DistributionSpec, ParamDim, ParameterSpace, MAX_REJECTIONS};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GenError {
    #[error("truncated normal({mu}, {sigma}) on [{lo}, {hi}] rejected {max} draws", max = MAX_REJECTIONS)]
    RejectionOverflow { mu: f64, sigma: f64, lo: f64, hi: f64 },
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error("scenario `{0}` names an unknown twin archetype")]
    UnknownTwin(String),
    #[error("index {index} outside plan of {count} variations")]
    IndexOutOfRange { index: u64, count: u64 },
    #[error("plan count must be positive")]
    EmptyPlan,
    #[error("plan was made for registry {expected}, got {found}")]
    RegistryMismatch { expected: String, found: String },
    #[error("variation {index}: {source}")]
    Twin { index: u64, source: TwinError },
    #[error("could not start worker pool: {0}")]
    ThreadPool(String),
}

impl GenError {
    pub fn code(&self) -> &'static str {
        match self {
            GenError::RejectionOverflow { .. } => "E_REJECTION_OVERFLOW",
            GenError::UnknownScenario(_) => "E_UNKNOWN_SCENARIO",
            GenError::UnknownTwin(_) => "E_UNKNOWN_TWIN",
            GenError::IndexOutOfRange { .. } => "E_INDEX_RANGE",
            GenError::EmptyPlan => "E_EMPTY_PLAN",
            GenError::RegistryMismatch { .. } => "E_REGISTRY_MISMATCH",
            GenError::Twin { source, .. } => source.code(),
            GenError::ThreadPool(_) => "E_THREAD_POOL",
        }
    }
}

/// Everything that determines a dataset's bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationPlan {
    pub scenario_id: String,
    pub count: u64,
    pub master_seed: u64,
    pub registry_digest: String,
    pub sensor: SensorModel,
}

impl GenerationPlan {
    pub fn new(registry: &Registry, scenario_id: &str, count: u64, master_seed: u64, sensor: SensorModel) -> Self {
        GenerationPlan {
            scenario_id: scenario_id.to_string(),
            count,
            master_seed,
            registry_digest: registry.digest().to_string(),
            sensor,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Variation {
    Generated {
        scene: SceneInstance,
        observation: Observation,
        params: crate::twin::ParamAssignment,
    },
    /// Parameters admitted no valid scene; kept so index ranges stay dense.
    Skipped {
        scenario_id: String,
        index: u64,
        params: crate::twin::ParamAssignment,
        reason: String,
    },
}

impl Variation {
    pub fn index(&self) -> u64 {
        match self {
            Variation::Generated { scene, .. } => scene.variation_index,
            Variation::Skipped { index, .. } => *index,
        }
    }
}

/// Produces variation `index` of the plan.
pub fn generate_variation(
    registry: &Registry,
    scenario_id: &str,
    plan: &GenerationPlan,
    index: u64,
) -> Result<Variation, GenError> {
    if index >= plan.count {
        return Err(GenError::IndexOutOfRange { index, count: plan.count });
    }
    let scenario = registry
        .scenario(scenario_id)
        .ok_or_else(|| GenError::UnknownScenario(scenario_id.to_string()))?;
    let template = scenario.template().ok_or_else(|| GenError::UnknownTwin(scenario_id.to_string()))?;

    let mut rng = derive_rng(plan.master_seed, scenario_id, index);
    let params = sample_params(&scenario.params, &mut rng)?;
    let mut scene = match instantiate_scene(template, &params, scenario_id, index) {
        Ok(scene) => scene,
        Err(TwinError::Infeasible(reason)) => {
            return Ok(Variation::Skipped { scenario_id: scenario_id.to_string(), index, params, reason });
        }
        Err(source) => return Err(GenError::Twin { index, source }),
    };
    for inj in &scenario.injections {
        scene = apply_injection(scene, inj, &mut rng).map_err(|source| GenError::Twin { index, source })?;
    }
    let observation = observe(&scene, &plan.sensor, &mut rng);
    Ok(Variation::Generated { scene, observation, params })
}

/// Runs every index of the plan on `threads` workers; output is index-ordered.
pub fn generate_plan(registry: &Registry, plan: &GenerationPlan, threads: usize) -> Result<Vec<Variation>, GenError> {
    if plan.count == 0 {
        return Err(GenError::EmptyPlan);
    }
    if plan.registry_digest != registry.digest() {
        return Err(GenError::RegistryMismatch {
            expected: plan.registry_digest.clone(),
            found: registry.digest().to_string(),
        });
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| GenError::ThreadPool(e.to_string()))?;
    pool.install(|| {
        (0..plan.count)
            .into_par_iter()
            .map(|i| generate_variation(registry, &plan.scenario_id, plan, i))
            .collect()
    })
}
