use std::path::PathBuf;

use crate::model::{VarId, Violation};

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse classification used for CLI exit codes and FFI status codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Malformed input or a violated model/problem/spec invariant.
    Validation,
    /// Search finished without a plan, ran out of expansions, or hit the
    /// request budget.
    NoPlan,
    /// Operating-system level failure (file not found, permissions).
    Io,
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid variable id `{id}`: {reason}")]
    InvalidVarId { id: String, reason: &'static str },

    #[error("duplicate variable `{0}`")]
    DuplicateVar(VarId),

    #[error("edge {from} -> {to} references undeclared variable `{missing}`")]
    DanglingEdge {
        from: VarId,
        to: VarId,
        missing: VarId,
    },

    #[error("causal graph has a cycle through edge {from} -> {to}")]
    Cycle { from: VarId, to: VarId },

    #[error("pseudo-count must be positive (a = {a}, b = {b})")]
    InvalidBeta { a: f64, b: f64 },

    #[error("unknown variable `{0}`")]
    UnknownVar(VarId),

    #[error("invalid capability spec: {0}")]
    InvalidSpec(String),

    #[error("impossible evidence: the conditioning event has probability 0")]
    ImpossibleEvidence,

    #[error("invalid model: {}", format_violations(.0))]
    InvalidModel(Vec<Violation>),

    #[error("trace has {0} observation(s); at least 2 are required")]
    TraceTooShort(usize),

    #[error("invalid observation: {0}")]
    InvalidObservation(String),

    #[error("{unknown} unknown variables exceed the completion limit of {max}")]
    TooManyUnknowns { unknown: usize, max: usize },

    #[error("`{0}` is not applicable in the current state")]
    NotApplicable(String),

    #[error("request budget exhausted")]
    BudgetExhausted,

    #[error("no plan found")]
    NoPlan,

    #[error("search exceeded the expansion limit of {0} nodes")]
    ExpansionLimit(usize),

    #[error("instance exceeds oracle guard: {0}")]
    OracleGuard(String),

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("{path}: {message}")]
    Format { path: String, message: String },

    #[error("line {line}: {message}")]
    TraceLine { line: usize, message: String },

    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::NoPlan | Error::ExpansionLimit(_) | Error::BudgetExhausted => ErrorKind::NoPlan,
            Error::Io { .. } => ErrorKind::Io,
            _ => ErrorKind::Validation,
        }
    }

    pub(crate) fn format(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

fn format_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}
