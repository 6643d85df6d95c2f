use thiserror::Error;

/// Errors raised by generators, counters and experiment drivers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("size overflow: {0}")]
    Size(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("parameter out of range: {0}")]
    Range(String),

    #[error("degenerate vertex: a ray endpoint coincides with the vertex")]
    DegenerateVertex,

    #[error("arithmetic overflow in exact integer computation")]
    Overflow,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("cap exceeded: {what} has {n} points, cap is {cap}")]
    Cap {
        what: &'static str,
        n: usize,
        cap: usize,
    },

    #[error("not a subset: {0}")]
    NotSubset(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("frequency outside the sampling guard: {0}")]
    Guard(String),

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("I/O error on {path}: {msg}")]
    Io { path: String, msg: String },

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
