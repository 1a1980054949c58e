//! Posterior sampling, MAP search, convergence diagnostics and the
//! second-stage observed proportion.

mod anneal;
mod diagnostics;
mod gradient;
mod hmc;
mod mode;
mod proportion;

pub use anneal::{simulated_annealing, AnnealError, AnnealResult, AnnealSchedule};
pub use diagnostics::{
    diagnostics, ess_bulk, ess_tail, quantile, series_ess, split_rhat, summarize, DiagnosticsError, ParamDiagnostics,
};
pub use gradient::{central_difference, grad, GradientError, LogDensity};
pub use hmc::{
    adaptation_windows, energy_error, hmc_sample, pooled, sample_chain, ChainDraws, ChainMeta, DualAveraging,
    MetricKind, SamplerConfig, SamplerError, DIVERGENCE_THRESHOLD,
};
pub use mode::{find_mode, Mode};
pub use proportion::{loess, loess_at, observed_proportion, ObservedProportion, SmoothError};
