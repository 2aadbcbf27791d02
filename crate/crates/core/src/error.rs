use thiserror::Error;

/// Errors raised by the numerical kernels, the models and the inference layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("ODE step size fell below {min_step:e} at s = {at} (singular right-hand side?)")]
    StepSizeUnderflow { at: f64, min_step: f64 },
    #[error("ODE right-hand side returned a non-finite value at s = {at}")]
    NonFiniteRhs { at: f64 },
    #[error("ODE integration exceeded {0} steps")]
    MaxStepsExceeded(usize),
    #[error("integrand is not finite at x = {at}")]
    NonFiniteIntegrand { at: f64 },
    #[error("no sign change on [{lo}, {hi}] (f(lo) = {f_lo}, f(hi) = {f_hi})")]
    NoSignChange { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },
    #[error("non-finite value: {0}")]
    NonFiniteValue(String),
    #[error("parameter outside the model domain: {0}")]
    DomainViolation(String),
    #[error("information matrix is singular (determinant {det:e})")]
    SingularInformation { det: f64 },
    #[error("optimizer did not converge after {iterations} iterations (|score| = {gradient_norm:e})")]
    NonConvergence { iterations: usize, gradient_norm: f64 },
    #[error("separation detected: estimate magnitude exceeded {bound}")]
    SeparationDetected { bound: f64 },
    #[error("negative likelihood-ratio radicand {0:e}")]
    NegativeRadicand(f64),
    #[error("non-positive curvature: {0}")]
    NonPositiveCurvature(String),
    #[error("characteristic left the parameter domain at (psi, lambda) = ({psi}, {lambda})")]
    PathLeftDomain { psi: f64, lambda: f64 },
    #[error("initial curve is tangent to the characteristic direction at xi = {xi}")]
    TangencyDetected { xi: f64 },
    #[error("(xi - c)^q is not real for xi = {xi}, q = {q}")]
    NonRealPower { xi: f64, q: f64 },
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("could not bracket the root after {0} expansions")]
    BracketingFailure(usize),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// True for failures of the data itself rather than of the numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(self, Error::InvalidInput(_))
    }
}
