//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("requested radius {requested} exceeds sample radius {available}")]
    OutOfWindow { requested: f64, available: f64 },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("singular basis matrix")]
    SingularBasis,

    #[error("motif points collide modulo the lattice")]
    MotifCollision,

    #[error("substitution matrix is not primitive")]
    NotPrimitive,

    #[error("illegal seed: {0}")]
    IllegalSeed(String),

    #[error("unknown letter {0:?}")]
    UnknownLetter(String),

    #[error("word not covered by block map rule: {0:?}")]
    IllegalWord(String),

    #[error("unknown preset {0:?}")]
    UnknownPreset(String),

    #[error(
        "window boundary hit: internal image {point:?} lies within {distance:e} of the window \
         boundary; perturb the shift or the window"
    )]
    BoundaryHit { point: Vec<f64>, distance: f64 },

    #[error("point cap exceeded: would generate {count} points, cap is {cap}")]
    CapExceeded { count: usize, cap: usize },

    #[error("radii must be strictly increasing")]
    NonMonotoneRadii,

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
