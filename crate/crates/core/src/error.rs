use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Failures of the model algebra, the analysis and the solver.
///
/// Numeric payloads are carried as `f64` regardless of the scalar type the
/// computation ran in.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("state outside the admissible domain: {0}")]
    Domain(String),

    #[error("state is not symmetrizable: eta = {eta:e} must be positive")]
    NotSymmetrizable { eta: f64 },

    #[error("flux Jacobian has complex eigenvalues: delta = {delta:e} < 0")]
    ComplexEigenvalues { delta: f64 },

    #[error("no positive equilibrium: requires kB > kD (kB = {k_b:e}, kD = {k_d:e})")]
    NoPositiveEquilibrium { k_b: f64, k_d: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("perturbation too large: cell {cell} {reason}")]
    PerturbationTooLarge { cell: usize, reason: String },

    #[error("left the hyperbolic domain at t = {t:e}, cell {cell}, state (B, E, D, v) = {state:?}: {reason}")]
    LeftHyperbolicDomain {
        cell: usize,
        t: f64,
        state: [f64; 4],
        reason: String,
    },

    #[error("non-finite value in cell {cell} at t = {t:e}")]
    NonFiniteValue { cell: usize, t: f64 },

    #[error("grid too small: {cells} cells, need at least {min}")]
    GridTooSmall { cells: usize, min: usize },

    #[error("time {t:e} outside trace extent [{start:e}, {end:e}]")]
    OutOfRange { t: f64, start: f64, end: f64 },

    #[error("insufficient data: {samples} usable samples, need at least {required}")]
    InsufficientData { samples: usize, required: usize },

    #[error("norm is not positive at t = {t:e}; window cannot be shrunk to a usable fit")]
    NonPositiveNorm { t: f64 },
}
