use thiserror::Error;

/// Errors produced by the planners, the numerical kernels and the simulator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{name} = {value} is outside the domain of the function")]
    Domain { name: &'static str, value: f64 },

    #[error("series did not meet its truncation criterion within {max_terms} terms")]
    NonConvergence { max_terms: usize },

    #[error("target {target} lies outside the range of the function")]
    Range { target: f64 },

    #[error("bracket expansion reached the domain bound {bound} without enclosing target {target}")]
    Bracket { target: f64, bound: f64 },

    #[error(
        "pFDR target not attainable for n <= {n_max}: rho({n_max}) = {rho_at_max} is below Q = {q}"
    )]
    NotAttainable { n_max: u64, rho_at_max: f64, q: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unsupported family: {0}")]
    UnsupportedFamily(String),

    #[error("quadrature failed: {0}")]
    Quadrature(String),

    #[error(
        "insufficient hits: {numerator} numerator and {denominator} denominator events, need {required} of each"
    )]
    InsufficientHits { numerator: u64, denominator: u64, required: u64 },

    #[error("no batch produced a rejection (estimated rejection probability {rejection_prob:e})")]
    DegenerateScenario { rejection_prob: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
