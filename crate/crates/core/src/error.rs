use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid edge count {m} for {n} nodes: need {min} <= m <= {max}")]
    EdgeCount { n: usize, m: usize, min: usize, max: usize },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    Shape { op: &'static str, lhs: (usize, usize), rhs: (usize, usize) },

    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),

    #[error("backward root must be 1x1, got {0:?}")]
    NonScalarRoot((usize, usize)),

    #[error("exhaustive search limited to n <= {max}, got n = {n}")]
    TooLarge { n: usize, max: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("reported cut {reported} disagrees with recomputed cut {recomputed}")]
    CutMismatch { reported: usize, recomputed: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
