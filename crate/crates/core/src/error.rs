use std::fmt;

use thiserror::Error;

use crate::types::CellId;

/// A single failed configuration check.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub field: &'static str,
    pub value: String,
    pub reason: &'static str,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} = {}: {}", self.field, self.value, self.reason)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration:{}", render_violations(.0))]
    InvalidConfig(Vec<Violation>),

    #[error("unknown {kind} label `{label}`")]
    UnknownLabel { kind: &'static str, label: String },

    #[error("cell {cell}: {reason} (sent={sent}, detected={detected}, errors={errors})")]
    InconsistentCell {
        cell: CellId,
        reason: &'static str,
        sent: u64,
        detected: u64,
        errors: u64,
    },

    #[error("pulse count {0} does not fit the 64-bit count range")]
    CountOverflow(f64),

    #[error("decoy precondition failed: {0}")]
    DecoyPrecondition(&'static str),

    #[error(
        "drift trace has {slices} slices of {per_slice} pulses, but the run has {total} pulses"
    )]
    TraceMismatch {
        slices: usize,
        per_slice: u64,
        total: u64,
    },

    #[error("line {line}, column {column}: {message}")]
    Parse {
        line: u64,
        column: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn render_violations(v: &[Violation]) -> String {
    v.iter().map(|v| format!("\n  - {v}")).collect()
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
