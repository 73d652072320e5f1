use thiserror::Error;

/// Errors raised across the toolkit.
///
/// Divergent moments and failed moment conditions are domain outcomes: the
/// callers that gate a scenario turn them into diagnostics rather than
/// aborting.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument `{arg}`: {reason}")]
    InvalidArgument { arg: &'static str, reason: String },

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: String,
        got: String,
    },

    #[error("absolute moment of order {order} is infinite")]
    DivergentMoment { order: u32 },

    #[error("jump integral diverges: monomial of degree {degree} has no finite moment")]
    DivergentIntegral { degree: u32 },

    #[error("tail mass beyond truncation level {epsilon} is not integrable")]
    NonIntegrableTail { epsilon: f64 },

    #[error("quadrature failed to reach tolerance: estimate {estimate}, error {error}")]
    Quadrature { estimate: f64, error: f64 },

    #[error("matrix is not Hurwitz (spectral abscissa {abscissa})")]
    Unstable { abscissa: f64 },

    #[error("uniform decay rate {alpha} is below the floor {floor}")]
    AlphaFloor { alpha: f64, floor: f64 },

    #[error("linear solve failed: {0}")]
    Singular(&'static str),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("parameter left the box at t = {time}")]
    Containment { time: f64 },

    #[error("too few points after burn-in: need {needed}, have {have}")]
    TooFewPoints { needed: usize, have: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(arg: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidArgument {
        arg,
        reason: reason.into(),
    }
}
