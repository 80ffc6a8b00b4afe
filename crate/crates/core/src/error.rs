use thiserror::Error;

use crate::params::ParamId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A model parameter lies outside its admissible domain.
    #[error("parameter {param} = {value} outside its domain: {reason}")]
    ParameterDomain {
        param: &'static str,
        value: f64,
        reason: &'static str,
    },

    /// The integrator produced a non-finite or substantially negative state.
    #[error("integration diverged at step {step} (t = {time} days): {reason}")]
    Divergence {
        step: usize,
        time: f64,
        reason: String,
    },

    /// Divergence while evaluating a perturbed point of the sensitivity matrix.
    #[error("sensitivity evaluation failed for {param}: {source}")]
    Sensitivity {
        param: ParamId,
        #[source]
        source: Box<Error>,
    },

    /// A caller broke an operation's precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("no feasible point: all {0} evaluations returned +inf")]
    NoFeasiblePoint(usize),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// True for failures of the numerics (as opposed to bad input).
    pub fn is_numeric(&self) -> bool {
        match self {
            Error::Divergence { .. } | Error::NoFeasiblePoint(_) | Error::Sensitivity { .. } => {
                true
            }
            _ => false,
        }
    }
}
