//! Hazard-informed synthetic data pipeline.
//!
//! The crate turns a declared hazard ontology (assets, exposure modes and
//! hazard scenarios) into deterministic labeled datasets produced by small
//! analytic digital twins, then learns a linear safety envelope that can veto
//! an unsafe placement plan.
//!
//! Layout follows the pipeline:
//!
//! - [`hsl`]: lexer, parser, pretty-printer and lowering for `.hsl` sources.
//! - [`ontology`]: the validated, frozen [`ontology::Registry`].
//! - [`twin`]: twin archetypes, metrics, failure injection, sensor model.
//! - [`genvar`]: keyed random streams, parameter sampling, plan execution.
//! - [`labeler`]: ground-truth label rules evaluated on exact metrics.
//! - [`dataset`]: canonical record lines, manifests, digests and splits.
//! - [`envelope`]: features, logistic model, evaluation, override decision.

pub mod canon;
pub mod dataset;
pub mod envelope;
pub mod genvar;
pub mod hsl;
pub mod labeler;
pub mod ontology;
pub mod twin;
pub mod units;

pub use units::{Dimension, Quantity, Unit};
