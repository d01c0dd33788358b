use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid time scale: {0}")]
    InvalidScale(String),
    #[error("t = {0} is not a point of the time scale")]
    NotInScale(f64),
    #[error("window [{0}, {1}] does not intersect the time scale")]
    EmptyWindow(f64, f64),
    #[error("no admissible difference stencil at t = {0}")]
    NoStencil(f64),
    #[error("not regressive at t = {t}: 1 + mu*p = {value}")]
    NotRegressive { t: f64, value: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("singular one-step map at t = {0}; backward transition undefined")]
    Singular(f64),
    #[error("divergent: {0}")]
    Divergent(String),
    #[error("tail bound {bound:e} exceeds tolerance {tol:e}; extend the window")]
    TailNotNegligible { bound: f64, tol: f64 },
    #[error("no hyperbolic splitting: {0}")]
    NoSplitting(String),
    #[error("contraction hypothesis fails: lambda = {0} >= 1")]
    NotContraction(f64),
    #[error("no convergence after {iterations} iterations (last update {update:e})")]
    NotConverged { iterations: usize, update: f64 },
    #[error("iterate left the admissible ball: norm {norm} > radius {radius}")]
    BallEscape { norm: f64, radius: f64 },
    #[error("declared nonlinearity constant violated: {0}")]
    ConstantViolated(String),
    #[error("time scale is not syndetic")]
    NonSyndetic,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("exponent search failed: {0}")]
    Search(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
}

impl Error {
    /// Refusals are hypotheses the caller's problem fails; everything else is
    /// a numerical or input failure.
    pub fn is_refusal(&self) -> bool {
        matches!(
            self,
            Error::NotContraction(_)
                | Error::NoSplitting(_)
                | Error::NonSyndetic
                | Error::Divergent(_)
                | Error::TailNotNegligible { .. }
                | Error::NotRegressive { .. }
                | Error::Singular(_)
                | Error::ConstantViolated(_)
                | Error::BallEscape { .. }
        )
    }

    /// Errors caused by malformed or out-of-range input.
    pub fn is_input(&self) -> bool {
        matches!(
            self,
            Error::InvalidScale(_)
                | Error::NotInScale(_)
                | Error::EmptyWindow(..)
                | Error::Dimension { .. }
                | Error::InvalidParameter(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
