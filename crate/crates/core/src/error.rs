use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("cutoff {cutoff} too small: tail mass {tail_mass:e} exceeds {threshold:e}")]
    CutoffTooSmall {
        cutoff: usize,
        tail_mass: f64,
        threshold: f64,
    },

    #[error("weights violate phase-reference pairing at pair {pair}")]
    PairingViolation { pair: usize },

    #[error("weight vector is identically zero")]
    ZeroWeights,

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("matrix is not unitary (max |U†U - I| = {deviation:e})")]
    NonUnitary { deviation: f64 },

    #[error("unitary completion degenerated (residual norm {residual:e})")]
    CompletionFailure { residual: f64 },

    #[error("network column product cannot be made real (residual {residual:e})")]
    ComplexResidual { residual: f64 },

    #[error(
        "weights have support outside the range of the Fisher matrix \
         (rank {rank} of {dim}, out-of-range residual {residual:e})"
    )]
    UnsupportedDirection {
        rank: usize,
        dim: usize,
        residual: f64,
    },

    #[error("closed-form variance {closed_form:e} disagrees with solve {numeric:e}")]
    ClosedFormMismatch { numeric: f64, closed_form: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("mode index {index} out of range for {modes} modes")]
    IndexOutOfRange { index: usize, modes: usize },

    #[error("components are not orthonormal (max overlap deviation {deviation:e})")]
    NonOrthogonal { deviation: f64 },

    #[error("mesh application broke photon-number conservation by {deviation:e}")]
    ConservationViolated { deviation: f64 },

    #[error("root solve failed: {0}")]
    RootSolve(String),

    #[error("invalid allocation plan: {0}")]
    InvalidPlan(String),

    #[error("function gradient vanishes at the expansion point")]
    ZeroGradient,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("mesh text parse error on line {line}: {message}")]
    MeshParse { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
