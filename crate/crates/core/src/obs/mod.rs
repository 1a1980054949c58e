//! Observation model: likelihoods, priors, IFR elicitation and the log posterior.

mod likelihood;
mod posterior;
mod prior;

pub use likelihood::{
    gauss_hermite, ln_factorial, lognormal_moments, mixture_loglik, negbin_logpmf, poisson_lognormal_logpmf,
    poisson_logpmf, HERMITE_ORDER,
};
pub use posterior::{EpiPosterior, Evaluation, ParamLayout, Transform};
pub use prior::{daily_ifr, elicit_ifr, AgeCaseMatrix, Prior, PriorSpec};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ObsError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("numerical failure{}: {message}", day.map(|t| format!(" on day {t}")).unwrap_or_default())]
    Numerical { day: Option<usize>, message: String },
    #[error("IFR elicitation failed: {0}")]
    Elicitation(String),
    #[error("internal error: {0}")]
    Internal(String),
}
