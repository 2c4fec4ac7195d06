use thiserror::Error;

/// Errors raised by the c-value toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("dimension {0} is too small (need at least 2)")]
    DimensionTooSmall(usize),

    #[error("state is not normalized: norm = {norm}")]
    NotNormalized { norm: f64 },

    #[error("operator is not Hermitian: max |A - A^dagger| = {deviation:e}")]
    NotHermitian { deviation: f64 },

    #[error("basis is not orthonormal: max Gram deviation = {deviation:e}")]
    NotOrthonormal { deviation: f64 },

    #[error("vanishing overlap |<phi|psi>| = {overlap:e} below cutoff")]
    VanishingOverlap { overlap: f64 },

    #[error("vanishing post-selection probability {probability:e}")]
    VanishingPostSelection { probability: f64 },

    #[error("weak value routes disagree at index {index}: quotient {quotient}, brackets {brackets}")]
    RouteDisagreement {
        index: usize,
        quotient: String,
        brackets: String,
    },

    #[error("invalid ensemble: {0}")]
    InvalidEnsemble(String),

    #[error("invalid xi model: {0}")]
    InvalidXiModel(String),

    #[error("third moment of xi is {0:e}; the commutator representation needs it to vanish")]
    ThirdMomentViolation(f64),

    #[error("xi model has continuous support; exact enumeration needs a finite-support model")]
    ContinuousSupport,

    #[error("xi must be nonzero to recover the imaginary part")]
    ZeroXi,

    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("basis index {0} is masked (overlap below cutoff)")]
    MaskedIndex(usize),

    #[error("provenance mismatch: {0}")]
    ProvenanceMismatch(String),

    #[error("operator is not local on the requested subsystem: residual {residual:e}")]
    NotLocalOperator { residual: f64 },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid point {0} is outside the interior or below the density cutoff")]
    MaskedGridPoint(usize),

    #[error("wavefunction does not vanish at the boundary: edge density ratio {ratio:e}")]
    BoundaryLeakage { ratio: f64 },

    #[error("invalid scale factor {0}")]
    InvalidScale(f64),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
