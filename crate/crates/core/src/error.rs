use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Broad failure classes. The CLI maps these onto its exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Regime,
    Numeric,
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("parameter regime not supported: {0}")]
    Regime(String),

    #[error("|delta| = 1: correlation length undefined, use the Newton solver")]
    DegenerateDelta,

    #[error("correlation length tau is undefined ({0})")]
    TauUndefined(String),

    #[error("profile boundary {profile:?} does not match configuration boundary {config:?}")]
    BoundaryMismatch {
        profile: crate::model::Boundary,
        config: crate::model::Boundary,
    },

    #[error("semiclassical profile residual {residual:e} exceeds tolerance {tolerance:e}")]
    InaccurateProfile { residual: f64, tolerance: f64 },

    #[error("Newton iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("amplitude at index {index} left the physical cone (value {value:e})")]
    NegativeAmplitude { index: usize, value: f64 },

    #[error("Bogoliubov stability violated: |tanh(2 nu)| = {ratio} >= 1")]
    StabilityViolation { ratio: f64 },

    #[error("band gap is closed (delta = {delta})")]
    GapClosed { delta: f64 },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("quadratic Hamiltonian is not positive definite: {reason}")]
    UnstableProfile {
        reason: String,
        /// Offending eigenvalues of the dynamical matrix as (re, im).
        eigenvalues: Vec<(f64, f64)>,
    },

    #[error("insufficient support for an exponential fit: {0}")]
    InsufficientSupport(String),

    #[error("perturbation theory invalid: t = {t} >= delta_wH = {delta_wh}")]
    PerturbationInvalid { t: f64, delta_wh: f64 },

    #[error("outside the validity domain: {0}")]
    OutOfValidity(String),

    #[error("no localized modes found on the scan grid")]
    NoLocalizedModes,

    #[error("Fock cutoff {0} is too small (minimum 8)")]
    CutoffTooSmall(usize),

    #[error("ground energy not converged in the cutoff: relative shift {shift:e} > {tolerance:e}")]
    NotConverged { shift: f64, tolerance: f64 },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        use Error::*;
        match self {
            InvalidConfig(_) | Shape(_) | Json(_) => ErrorKind::Config,
            Regime(_)
            | DegenerateDelta
            | TauUndefined(_)
            | BoundaryMismatch { .. }
            | StabilityViolation { .. }
            | GapClosed { .. }
            | PerturbationInvalid { .. }
            | OutOfValidity(_)
            | NoLocalizedModes
            | CutoffTooSmall(_) => ErrorKind::Regime,
            InaccurateProfile { .. }
            | NoConvergence { .. }
            | NegativeAmplitude { .. }
            | UnstableProfile { .. }
            | InsufficientSupport(_)
            | NotConverged { .. } => ErrorKind::Numeric,
            Io(_) | Csv(_) => ErrorKind::Io,
        }
    }
}
