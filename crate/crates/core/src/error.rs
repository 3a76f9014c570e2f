use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("linear size L = {0} is not supported (need L >= 2)")]
    InvalidSize(usize),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("error species mismatch: expected {expected:?}, got {actual:?}")]
    SpeciesMismatch {
        expected: crate::code::Pauli,
        actual: crate::code::Pauli,
    },
    #[error("parameter `{name}` out of range: {detail}")]
    OutOfRange { name: &'static str, detail: String },
    #[error("enumeration over 2^{bits} configurations exceeds the budget of 2^{limit}")]
    BudgetExceeded { bits: usize, limit: usize },
    #[error("not enough data: {0}")]
    InsufficientData(String),
    #[error("{0}")]
    Invalid(String),
    #[error("{flagged} of {total} realizations failed equilibration (limit {limit_percent}%)")]
    EquilibrationFailure {
        flagged: usize,
        total: usize,
        limit_percent: f64,
    },
    #[error("run interrupted after {sweeps} sweeps; checkpoint written")]
    Interrupted { sweeps: u64 },
    #[error("sweep budget exhausted after {sweeps} sweeps; checkpoint written")]
    SweepBudget { sweeps: u64 },
    #[error("bad file {path}: {detail}")]
    Format { path: PathBuf, detail: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Bincode(#[from] bincode::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
