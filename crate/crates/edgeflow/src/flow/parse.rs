//! Flow document parsing and serialization.
//!
//! The file format is a single JSON object with fields `tabs`, `nodes`, and
//! `wires`. Unknown fields are rejected. `parse_flow` additionally runs full
//! validation, so a returned graph satisfies every structural invariant.

use thiserror::Error;

use super::model::FlowGraph;
use super::validate::{validate, Violation};

#[derive(Debug, Error)]
pub enum ParseError {
    /// The document is not well-formed JSON or does not match the schema.
    #[error("syntax error at line {line}, column {column}: {detail}")]
    Syntax {
        line: usize,
        column: usize,
        detail: String,
    },
    /// The document parsed but violates flow invariants.
    #[error("invalid flow: {}", format_violations(.0))]
    Invalid(Vec<Violation>),
}

fn format_violations(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

/// Parses a flow document and validates it.
pub fn parse_flow(text: &str) -> Result<FlowGraph, ParseError> {
    let graph: FlowGraph = serde_json::from_str(text).map_err(|e| ParseError::Syntax {
        line: e.line(),
        column: e.column(),
        detail: e.to_string(),
    })?;
    let violations = validate(&graph);
    if violations.is_empty() {
        Ok(graph)
    } else {
        Err(ParseError::Invalid(violations))
    }
}

/// Serializes a flow to its document form. `parse_flow(serialize_flow(f))`
/// returns `f` unchanged for every valid flow.
pub fn serialize_flow(flow: &FlowGraph) -> String {
    let mut out = serde_json::to_string_pretty(flow).expect("flow serialization cannot fail");
    out.push('\n');
    out
}
