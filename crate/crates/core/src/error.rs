use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("beamforming vector is not unit norm (norm^2 = {0})")]
    NotUnitNorm(f64),

    #[error("{bits} codebook bits exceed the cap of {cap}")]
    BitCap { bits: u32, cap: u32 },

    #[error("argument outside domain: {0}")]
    Domain(String),

    #[error(
        "quadrature did not converge: estimated error {error:.3e} after {intervals} intervals"
    )]
    Quadrature { error: f64, intervals: usize },

    #[error("root bracket failure: {0}")]
    Bracket(String),

    #[error("no closed form for a {nt}x{nr} channel")]
    NoClosedForm { nt: usize, nr: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
