use thiserror::Error;

/// Every failure the library can report.
///
/// Variants fall into two families that the CLI maps onto distinct exit
/// codes: configuration problems (bad input, violated preconditions) and
/// numerical failures discovered while integrating or diagnosing a run.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("t = {t} lies outside the evaluation window [{start}, {end}]")]
    OutOfWindow { t: f64, start: f64, end: f64 },

    #[error("negative friction coefficient kappa = {value:e} at t = {t}")]
    NegativeFriction { t: f64, value: f64 },

    #[error("auxiliary solution became singular (rho = {rho:e}) at t = {t}")]
    Singularity { t: f64, rho: f64 },

    #[error("state support leaks out of the truncated basis: trace deficit {deficit:e} before renormalization")]
    SupportLeak { deficit: f64 },

    #[error("operator is not Hermitian (max |A - A^dagger| = {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("expectation value has imaginary part {imag:e}")]
    ComplexExpectation { imag: f64 },

    #[error("tail population {tail:e} exceeds threshold {threshold:e} at t = {t}")]
    TruncationLeak { t: f64, tail: f64, threshold: f64 },

    #[error("density matrix lost positivity: min eigenvalue {min_eig:e} at t = {t}")]
    PositivityLoss { t: f64, min_eig: f64 },

    #[error("all eigenpairs are degenerate within the gap tolerance")]
    DegenerateSpectrum,

    #[error("observable lies outside the quadratic operator algebra (residual {residual:e})")]
    OutsideQuadraticAlgebra { residual: f64 },

    #[error("non-finite value encountered at t = {t}")]
    NonFinite { t: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("validation error at `{path}`: {message}")]
    Validation { path: String, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// True for errors that stem from the input rather than from the numerics.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::InvalidConfig(_)
                | Error::Parse(_)
                | Error::Validation { .. }
                | Error::NegativeFriction { .. }
                | Error::DimensionMismatch { .. }
                | Error::SupportLeak { .. }
        )
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
