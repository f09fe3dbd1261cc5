use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A model or configuration invariant does not hold.
    #[error("invalid model: {0}")]
    Invalid(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("quadrature: {0}")]
    Quadrature(String),

    /// The reduced model is not usable for observer design.
    #[error("reduced model rejected: {0}")]
    Structure(String),

    #[error("simulation failed at step {step}: {reason}")]
    Simulation { step: usize, reason: String },

    #[error("observer diverged at step {step}: {reason}")]
    Divergence { step: usize, reason: String },

    #[error("design infeasible: {reason} (best lambda_max = {best_lambda_max:.3e})")]
    Infeasible { reason: String, best_lambda_max: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Whether the failure is numerical (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Simulation { .. }
                | Error::Divergence { .. }
                | Error::Infeasible { .. }
                | Error::Numerical(_)
        )
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }
}
