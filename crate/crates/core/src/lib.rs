//! Bayesian inference for discrete-time SEIR/SEIRS models fitted to daily deaths.
//!
//! * [`epi`]: delay distributions and the forward recursions producing
//!   total cases, susceptibles, infectives and expected deaths.
//! * [`obs`]: death-count likelihoods, priors, IFR elicitation and the
//!   unconstrained log posterior.
//! * [`inference`]: HMC with dual averaging, simulated annealing,
//!   convergence diagnostics and the second-stage observed proportion.
//! * [`select`]: information criteria, bridge sampling and the
//!   endemicity covariance diagnostic.
//! * [`phase`]: the susceptible/infectious phase plane.

pub mod epi;
pub mod inference;
pub mod obs;
pub mod phase;
pub mod select;
