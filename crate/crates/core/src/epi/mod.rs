//! Deterministic discrete-time epidemic recursions and delay machinery.

mod config;
mod delay;
mod params;
mod paths;

pub use config::{
    births_per_day, ifr_at, lambda_at, Likelihood, ModelConfig, ModelFlags, RecursionRanges,
};
pub use delay::{
    discretize_delay, discretize_delay_with_step, DelayKind, DelayPmf, DelaySpec, GammaDelay,
    DEFAULT_GRID_STEP,
};
pub use params::ParamVector;
pub use paths::{
    lambda_series, reproduction_series, seirs_reentry, simulate_paths, vaccination_term, EpiModel, Infeasible,
    LatentPaths, StateKind,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EpiError {
    #[error("invalid delay distribution: {0}")]
    InvalidDelay(String),
    #[error("invalid model configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("day {t} outside [{lo}, {hi}]")]
    OutOfRange { t: usize, lo: usize, hi: usize },
}
