use thiserror::Error;

/// Errors raised by the simulation and fitting routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found} ({context})")]
    DimensionMismatch {
        expected: usize,
        found: usize,
        context: &'static str,
    },

    #[error("matrix is not Hermitian (max deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("numeric failure: {0}")]
    NumericFailure(String),

    #[error(
        "stationary subspace is degenerate ({zero_modes} zero modes); \
         integrate from a chosen initial state for a long time instead"
    )]
    DegenerateSteadyState { zero_modes: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("undriven emitter has no correlation function")]
    Undriven,

    #[error("kernel support exceeds data: sigma {sigma} ns > span/4 = {limit} ns")]
    KernelTooWide { sigma: f64, limit: f64 },

    #[error("curve does not bracket its half maximum on both sides")]
    NotBracketed,

    #[error("not in Autler-Townes regime: found {maxima} fluorescence maxima")]
    NotAutlerTownes { maxima: usize },

    #[error("fit precondition violated: {0}")]
    FitPrecondition(String),

    #[error("singular normal equations after damped retries")]
    SingularNormalEquations,

    #[error("model returned a non-finite value at x = {x}")]
    NonFiniteModel { x: f64 },

    #[error("degenerate abscissas: all x values are identical")]
    DegenerateAbscissa,

    #[error("fringe has zero total signal (max + min = 0)")]
    ZeroFringe,
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
