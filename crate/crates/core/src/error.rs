use thiserror::Error;

/// Errors raised by model evaluation, simulation, scoring and estimation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A state or argument lies outside the domain of a rate law.
    #[error("domain error: {0}")]
    Domain(String),

    /// A model callback produced a non-finite value.
    #[error("non-finite {what} at state {state:?}")]
    NonFinite { what: &'static str, state: Vec<f64> },

    /// The simulated state left the finite range.
    #[error("simulation diverged at step {step}")]
    Diverged { step: usize },

    /// A perturbation or override produced an invalid parameter value.
    #[error("parameter `{name}` = {value} is invalid: {reason}")]
    Parameter {
        name: String,
        value: f64,
        reason: &'static str,
    },

    /// Trajectory and model disagree (e.g. a reaction fired at zero rate).
    #[error("inconsistent trajectory: {0}")]
    Inconsistent(String),

    /// `σ Γ = ∇θ a` could not be solved reliably.
    #[error("ill-conditioned diffusion matrix at step {step} (condition number {condition:e})")]
    IllConditioned { step: usize, condition: f64 },

    /// Malformed arguments or mismatched shapes.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// The data needed by an estimator was not recorded.
    #[error("capability missing: {0}")]
    Capability(String),

    /// Malformed model text, located at a 1-based line and column.
    #[error("{line}:{column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    /// Series with zero variance has no autocorrelation function.
    #[error("autocorrelation undefined for a zero-variance series")]
    ZeroVariance,

    /// The autocorrelation never settled inside the noise band.
    #[error("no decorrelation time estimate: autocorrelation never settles within ±{band:.4} up to lag {max_lag}")]
    NoDecorrelation { band: f64, max_lag: usize },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
