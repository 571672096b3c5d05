use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("field has {got} values, grid expects {expected}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("non-finite value at grid index {index}")]
    NonFinite { index: usize },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("mollification width {sigma} is below two grid spacings ({min})")]
    SigmaTooSmall { sigma: f64, min: f64 },

    #[error("invalid vortex configuration: {0}")]
    InvalidVortices(String),

    #[error("invalid nonlinearity: {0}")]
    InvalidModel(String),

    #[error("nonlinearity evaluated at negative argument {value} (grid index {index:?})")]
    NegativeArgument { value: f64, index: Option<usize> },

    #[error("value {value} outside the invertible range [{lo}, {hi})")]
    OutOfRange { value: f64, lo: f64, hi: f64 },

    #[error("Helmholtz precondition violated: q = {q} must exceed sup|c| = {c_max}")]
    PreconditionViolated { q: f64, c_max: f64 },

    #[error("coupling q = {q} does not exceed sup|c| = {c_max} at the current iterate")]
    QTooSmall { q: f64, c_max: f64 },

    #[error("invalid coupling constant q = {0}")]
    InvalidCoupling(f64),

    #[error("q_list must be ascending")]
    NotAscending,

    #[error("no convergence after {iterations} iterations (last residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("pointwise bounds violated by {excess:e} (tolerance {tolerance:e})")]
    BoundsViolation { excess: f64, tolerance: f64 },

    #[error("flux 4*pi*n = {required} exceeds the largest attainable value {attainable} on this torus")]
    Infeasible { required: f64, attainable: f64 },
}
