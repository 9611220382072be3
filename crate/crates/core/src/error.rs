use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised by the toolkit.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A parameter set violates a structural requirement.
    #[error("parameter error: {0}")]
    Parameter(String),

    /// The adaptive integrator could not continue.
    #[error("integration failed at t = {t}: {reason}")]
    Integration { t: f64, reason: String },

    /// An implicit equation could not be inverted.
    #[error("inversion error: {0}")]
    Inversion(String),

    /// A quadrature did not reach the requested accuracy.
    #[error("quadrature error: {0}")]
    Quadrature(String),

    /// A diagnostic could not be computed reliably.
    #[error("analysis error: {0}")]
    Analysis(String),

    /// The forcing fails one of the standing hypotheses.
    #[error("hypothesis violated: {0}")]
    Hypothesis(#[from] HypothesisViolation),
}

/// Structured rejection naming the failed hypothesis inequality.
#[derive(Debug, Clone, Error)]
pub enum HypothesisViolation {
    #[error("growth exponent gamma = {gamma} outside (0, {limit}) required for p = {p}")]
    GammaRange { gamma: f64, limit: f64, p: f64 },

    #[error("beta = 0: x*f(x) >= beta1*|x|^(gamma+1) cannot hold with beta1 > 0")]
    BetaNotPositive,

    #[error("twist inequality p*beta1 > q*beta2 fails: {p_beta1} <= {q_beta2}")]
    TwistInequality { p_beta1: f64, q_beta2: f64 },

    #[error("sampled inequality `{name}` fails at x = {x}: lhs {lhs} vs rhs {rhs}")]
    Sampled {
        name: &'static str,
        x: f64,
        lhs: f64,
        rhs: f64,
    },
}
