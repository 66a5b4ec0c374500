use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("expected a square matrix, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix contains a non-finite entry")]
    NonFinite,
    #[error("singular shift (sigma_min = {sigma_min:e})")]
    SingularShift { sigma_min: f64 },
    #[error("singular shift at node k = {node} (sigma_min = {sigma_min:e})")]
    SingularNode { node: i64, sigma_min: f64 },
    #[error("inverse residual check failed (residual = {residual:e})")]
    Residual { residual: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("hypothesis failed: {0}")]
    Hypothesis(String),
    #[error("eigenvalue too close to the imaginary axis (min |Re| = {min_re:e})")]
    ImaginaryAxis { min_re: f64 },
    #[error("spectrum touches the closed negative real axis")]
    NegativeRealAxis,
    #[error("{method} did not converge within {iterations} iterations")]
    NoConvergence { method: String, iterations: usize },
    #[error("{method} rejected: residual {residual:e} above acceptance threshold")]
    OracleRejected { method: String, residual: f64 },
    #[error("sampled numerical ranges intersect; no gap")]
    NoGap,
    #[error("profile entry {bound:e} does not dominate scaled inverse norm {actual:e} at index {index}")]
    ProfileInvalid { index: usize, bound: f64, actual: f64 },
    #[error("sampled resolvent norm {norm:e} exceeds divergence cap at z = {re}+{im}i")]
    Divergence { norm: f64, re: f64, im: f64 },
    #[error("dimension {dim} exceeds cap {cap}")]
    DimensionCap { dim: usize, cap: usize },
    #[error("ledger: {0}")]
    Ledger(String),
    #[error("parse error: {0}")]
    Parse(String),
}

/// Coarse classification used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Parse,
    Hypothesis,
    Numerical,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Parse(_) | Error::Dimension(_) | Error::NotSquare { .. } | Error::NonFinite => {
                ErrorClass::Parse
            }
            Error::InvalidParameter(_)
            | Error::Hypothesis(_)
            | Error::ImaginaryAxis { .. }
            | Error::NegativeRealAxis
            | Error::NoGap
            | Error::ProfileInvalid { .. }
            | Error::DimensionCap { .. } => ErrorClass::Hypothesis,
            _ => ErrorClass::Numerical,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
