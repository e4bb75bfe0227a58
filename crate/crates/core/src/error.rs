use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("negative weight {value} at index {index}")]
    NegativeWeight { index: usize, value: f64 },
    #[error("weights sum to {sum}, not 1")]
    NotNormalized { sum: f64 },
    #[error("empty weight vector")]
    Empty,
    #[error("density underflows to zero on every grid point")]
    DegenerateDensity,
    #[error("image has no positive pixel")]
    AllZeroImage,
    #[error("gamma must be positive, got {0}")]
    NonPositiveGamma(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("agent {agent} has no message from neighbor {neighbor}")]
    MissingNeighborMessage { agent: usize, neighbor: usize },
    #[error("problem size {size} exceeds dense cap {cap}")]
    DimensionTooLarge { size: usize, cap: usize },
    #[error("parameter `{0}` must be positive")]
    NonPositiveParameter(&'static str),
    #[error("support size must be at least 2, got {0}")]
    NTooSmall(usize),
    #[error("node {from} cannot reach non-neighbor {to}")]
    TopologyViolation { from: usize, to: usize },
    #[error("reference value equals initial value; relative error undefined")]
    DegenerateReference,
    #[error("bad IDX magic number {0:#010x}")]
    BadMagic(u32),
    #[error("file truncated: expected {expected} bytes, found {found}")]
    TruncatedFile { expected: usize, found: usize },
    #[error("scaled {}x{} image at offset ({row}, {col}) does not fit a {canvas}x{canvas} canvas", size.0, size.1)]
    OutOfCanvas {
        size: (usize, usize),
        row: usize,
        col: usize,
        canvas: usize,
    },
    #[error("support grid is not a rectangular lattice")]
    NonRectangularGrid,
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
