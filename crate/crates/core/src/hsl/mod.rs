//! The hazard specification language: a small declarative format for assets,
//! exposure modes and generation-ready hazard scenarios.
//!
//! ```text
//! asset human.child { kind: human name: "Child" }
//! exposure falling_object on human.child { vector: "struck by a falling object" }
//! scenario edge_placement {
//!   exposure: falling_object
//!   twin: tabletop_placement
//!   params { table_w: uniform(60 cm, 200 cm) ... }
//!   inject: gripper_offset(sigma: 2 cm)
//!   label edge_violation: clearance < 10 cm
//! }
//! ```

pub mod ast;
mod lexer;
mod lower;
mod parser;
mod pretty;
mod span;

use std::collections::HashMap;
use std::sync::Arc;

pub use ast::Document;
pub use lexer::{tokenize, Keyword, Token, TokenKind};
pub use lower::{lower, Lowered};
pub use parser::parse;
pub use pretty::pretty_print;
pub use span::{line_col, DiagSeverity, Diagnostic, SourceSpan};

use crate::ontology::{build_registry, Registry, SubjectKind};

/// Tokenize and parse one file.
pub fn parse_source(text: &str, file: &str) -> Result<Document, Vec<Diagnostic>> {
    parse(tokenize(text, file)?)
}

/// Tokenize, parse and lower one file.
pub fn compile_source(text: &str, file: &str) -> Result<Lowered, Vec<Diagnostic>> {
    lower(&parse_source(text, file)?)
}

/// Result of loading a set of sources into a registry.
#[derive(Debug)]
pub struct Loaded {
    pub registry: Registry,
    pub warnings: Vec<Diagnostic>,
}

/// Compiles every `(file, text)` pair and freezes the union into a registry.
/// Registry-level violations are reported at the offending declaration.
pub fn load_registry(sources: &[(String, String)]) -> Result<Loaded, Vec<Diagnostic>> {
    let mut errors = Vec::new();
    let mut warnings = Vec::new();
    let mut declarations = Vec::new();
    for (file, text) in sources {
        match compile_source(text, file) {
            Ok(lowered) => {
                declarations.extend(lowered.declarations);
                warnings.extend(lowered.warnings);
            }
            Err(diags) => errors.extend(diags),
        }
    }
    if !errors.is_empty() {
        return Err(errors);
    }
    let mut spans: HashMap<(SubjectKind, String), SourceSpan> = HashMap::new();
    for d in &declarations {
        if let Some(span) = d.span() {
            spans.entry((d.subject_kind(), d.id().to_string())).or_insert_with(|| span.clone());
        }
    }
    let fallback = SourceSpan {
        file: Arc::from(sources.first().map_or("<input>", |(f, _)| f.as_str())),
        line: 1,
        column: 1,
        byte_start: 0,
        byte_end: 0,
    };
    match build_registry(declarations) {
        Ok(registry) => Ok(Loaded { registry, warnings }),
        Err(report) => Err(report
            .errors
            .iter()
            .map(|e| {
                let span = spans.get(&(e.subject_kind, e.subject_id.clone())).unwrap_or(&fallback).clone();
                Diagnostic::error(e.code.as_str(), e.message.clone(), span)
            })
            .collect()),
    }
}
