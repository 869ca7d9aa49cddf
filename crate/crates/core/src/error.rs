use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("graph too large: {expected_edges:.0} expected edges exceeds the budget of {budget}")]
    Sizing { expected_edges: f64, budget: usize },

    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("area is inhibited")]
    Inhibited,

    #[error("infeasible core overlap: {0}")]
    Overlap(String),

    #[error("firing probability out of range: {0}")]
    MeanOutOfRange(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error("no assemblies have been trained")]
    NoAssemblies,

    #[error("outside the domain of the formula: {0}")]
    Domain(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
