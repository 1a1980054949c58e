//! Information criteria, bridge-sampling evidence, Bayes factors and the
//! endemicity covariance diagnostic.

mod bridge;
mod criteria;
mod endemic;

pub use bridge::{bayes_factor, bridge_log_ml, BayesFactor, BridgeConfig, Evidence};
pub use criteria::{criteria_from_loglik, information_criteria, refine_max_loglik, ModelScore};
pub use endemic::{endemicity_diagnostic, EndemicityReport};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SelectError {
    #[error("draws carry no per-observation log likelihood")]
    MissingLoglik,
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("bridge sampling failed: {0}")]
    Bridge(String),
}
