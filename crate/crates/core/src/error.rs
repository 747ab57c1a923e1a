use thiserror::Error;

/// Failure modes shared by every operation in the crate.
///
/// Each variant carries the name of the failing operation so that CLI
/// diagnostics can point at the offending input.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("{op}: point outside the weight's domain: {msg}")]
    Domain { op: &'static str, msg: String },
    #[error("{op}: matrix is not positive semidefinite (lambda_min = {lambda_min:e})")]
    NotPsd { op: &'static str, lambda_min: f64 },
    #[error("{op}: quadrature did not converge at level {level} (relative change {change:e})")]
    QuadratureNonConvergence { op: &'static str, level: u32, change: f64 },
    #[error("{op}: degenerate input: {msg}")]
    Degenerate { op: &'static str, msg: String },
    #[error("{op}: {fraction:.3} of samples are numerically singular")]
    SingularSample { op: &'static str, fraction: f64 },
    #[error("{op}: criterion does not cross 1 inside [{r_lo:e}, {r_hi:e}] at x = {x:?}")]
    BracketFailure { op: &'static str, x: Vec<f64>, r_lo: f64, r_hi: f64 },
    #[error("{op}: no convergence after {iters} iterations (relative residual {residual:e})")]
    NoConvergence { op: &'static str, iters: usize, residual: f64 },
    #[error("{op}: leading coefficient {value} leaves [{lo}, {hi}]")]
    EllipticityViolation { op: &'static str, value: f64, lo: f64, hi: f64 },
    #[error("{op}: only {found} admissible samples, need {needed}")]
    InsufficientSamples { op: &'static str, found: usize, needed: usize },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// Numerical failures map to exit code 3, everything else to 2.
    pub fn is_numerical(&self) -> bool {
        !matches!(self, Error::Config(_) | Error::Io(_))
    }

    pub fn domain(op: &'static str, msg: impl Into<String>) -> Self {
        Error::Domain { op, msg: msg.into() }
    }

    pub fn degenerate(op: &'static str, msg: impl Into<String>) -> Self {
        Error::Degenerate { op, msg: msg.into() }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
