use thiserror::Error;

/// Errors raised by the numerical core.
///
/// Numeric payloads are stored as `f64` regardless of the scalar type the
/// failing computation ran in.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("Laplace integral diverges: Re(lambda) = {re} is not above -theta0*|k| = {limit}")]
    Divergent { re: f64, limit: f64 },

    #[error("quadrature cannot reach tolerance {tol:e}: {reason}")]
    Accuracy { tol: f64, reason: String },

    #[error("Volterra sweep unstable at step {step}: |G| = {magnitude:e} exceeds {bound:e} (reduce dt or check Penrose stability)")]
    Unstable { step: usize, magnitude: f64, bound: f64 },

    #[error("contour unsafe: {0}")]
    ContourUnsafe(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("initial datum ({k}, {eta}) violates |f0| <= exp(-2 lambda0 <k,eta,eta'>) at eta' = {eta_prime}: {value:e} > {bound:e}")]
    BoundViolation {
        k: i64,
        eta: i64,
        eta_prime: f64,
        value: f64,
        bound: f64,
    },

    #[error("layer {requested} requested but only layers up to {completed} are complete")]
    IncompleteLayer { requested: u32, completed: u32 },

    #[error("layer (k={k}, eta={eta}, p={p}): {source}")]
    Layer {
        k: i64,
        eta: i64,
        p: u32,
        #[source]
        source: Box<Error>,
    },

    #[error("stability guard violated: dt*sup|E|*max|eta'| = {value:e} >= 1")]
    StabilityGuard { value: f64 },

    #[error("spectral grid does not cover {0}")]
    GridCoverage(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("decay fit needs a usable window: {0}")]
    InsufficientWindow(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
