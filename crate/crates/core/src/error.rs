use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("window {requested} exceeds path window {available}")]
    Window { requested: f64, available: f64 },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("measure has an atom at {0}; an atomless limit measure is required")]
    AtomicLimit(f64),
    #[error("family is not uniformly bounded")]
    Unbounded,
    #[error("node {node}: {reason}")]
    Node { node: usize, reason: String },
    #[error("process is not a martingale at node {node} (drift {drift:e})")]
    NonMartingale { node: usize, drift: f64 },
    #[error("degenerate bracket at node {node}: zero increment of C with nonzero variance")]
    DegenerateBracket { node: usize },
    #[error("Picard iteration diverged after {iterations} iterations")]
    Diverged { iterations: usize },
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Invalid(msg.into()))
}
