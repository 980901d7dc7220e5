use thiserror::Error;

use crate::dde::Trajectory;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The implicit amplitude equation has no root for the requested (T, n).
    #[error("no solution: {0}")]
    NoSolution(String),

    /// An iterative method failed to reach its tolerance.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A query point lies outside the stored data.
    #[error("out of range: {0}")]
    Range(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    /// The state became non-finite or the step size collapsed. Carries the
    /// trajectory computed up to the last accepted step.
    #[error("integration diverged after t = {t_last}")]
    Diverged {
        t_last: f64,
        partial: Box<Trajectory>,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
