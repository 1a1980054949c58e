use super::likelihood::{ln_factorial, negbin_logpmf_with, poisson_lognormal_logpmf};
use super::{ObsError, PriorSpec};
use crate::epi::{EpiModel, LatentPaths, Likelihood, ParamVector};
use crate::inference::LogDensity;

/// Map from the real line to a parameter's natural scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transform {
    /// `θ = e^x`.
    Log,
    /// `θ = 1 / (1 + e^{-x})`.
    Logit,
}

impl Transform {
    pub fn constrain(self, x: f64) -> f64 {
        match self {
            Transform::Log => x.exp(),
            Transform::Logit => {
                if x >= 0.0 {
                    1.0 / (1.0 + (-x).exp())
                } else {
                    let e = x.exp();
                    e / (1.0 + e)
                }
            }
        }
    }

    pub fn unconstrain(self, v: f64) -> f64 {
        match self {
            Transform::Log => v.ln(),
            Transform::Logit => v.ln() - (-v).ln_1p(),
        }
    }

    /// `log |dθ/dx|`.
    pub fn log_jacobian(self, x: f64) -> f64 {
        match self {
            Transform::Log => x,
            Transform::Logit => -softplus(x) - softplus(-x),
        }
    }
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Position of each sampled scalar in the unconstrained vector.
///
/// Order: `λ_1..λ_J`, sampled IFRs, ψ (Negative Binomial only), `c_init`,
/// σ (Poisson-LogNormal only).
#[derive(Debug, Clone, PartialEq)]
pub struct ParamLayout {
    pub n_lambdas: usize,
    /// Zero when the IFRs are held fixed.
    pub n_ifrs: usize,
    pub has_psi: bool,
    pub has_sigma: bool,
}

impl ParamLayout {
    pub fn new(n_lambdas: usize, n_ifrs: usize, likelihood: Likelihood) -> Self {
        Self {
            n_lambdas,
            n_ifrs,
            has_psi: likelihood == Likelihood::NegativeBinomial,
            has_sigma: likelihood == Likelihood::PoissonLogNormal,
        }
    }

    pub fn dim(&self) -> usize {
        self.n_lambdas + self.n_ifrs + self.has_psi as usize + 1 + self.has_sigma as usize
    }

    pub fn psi_index(&self) -> Option<usize> {
        self.has_psi.then_some(self.n_lambdas + self.n_ifrs)
    }

    pub fn c_init_index(&self) -> usize {
        self.n_lambdas + self.n_ifrs + self.has_psi as usize
    }

    pub fn sigma_index(&self) -> Option<usize> {
        self.has_sigma.then_some(self.c_init_index() + 1)
    }

    pub fn transform(&self, i: usize) -> Transform {
        if i >= self.n_lambdas && i < self.n_lambdas + self.n_ifrs {
            Transform::Logit
        } else {
            Transform::Log
        }
    }

    pub fn names(&self) -> Vec<String> {
        let mut names: Vec<String> = (1..=self.n_lambdas).map(|j| format!("lambda[{j}]")).collect();
        names.extend((1..=self.n_ifrs).map(|b| format!("ifr[{b}]")));
        if self.has_psi {
            names.push("psi".into());
        }
        names.push("c_init".into());
        if self.has_sigma {
            names.push("sigma".into());
        }
        names
    }

    /// Elementwise constrained values in layout order.
    pub fn constrain(&self, x: &[f64]) -> Vec<f64> {
        x.iter().enumerate().map(|(i, v)| self.transform(i).constrain(*v)).collect()
    }

    pub fn log_jacobian(&self, x: &[f64]) -> f64 {
        x.iter().enumerate().map(|(i, v)| self.transform(i).log_jacobian(*v)).sum()
    }

    /// Builds the model parameters; `fixed_ifrs` supplies the IFRs when they are not sampled.
    pub fn to_params(&self, x: &[f64], fixed_ifrs: &[f64]) -> ParamVector {
        let v = self.constrain(x);
        let j = self.n_lambdas;
        let ifrs = if self.n_ifrs > 0 {
            v[j..j + self.n_ifrs].to_vec()
        } else {
            fixed_ifrs.to_vec()
        };
        ParamVector {
            lambdas: v[..j].to_vec(),
            ifrs,
            psi: self.psi_index().map_or(1.0, |i| v[i]),
            c_init: v[self.c_init_index()],
            sigma: self.sigma_index().map(|i| v[i]),
        }
    }

    pub fn from_params(&self, p: &ParamVector) -> Vec<f64> {
        let mut v = p.lambdas.clone();
        if self.n_ifrs > 0 {
            v.extend(&p.ifrs);
        }
        if self.has_psi {
            v.push(p.psi);
        }
        v.push(p.c_init);
        if self.has_sigma {
            v.push(p.sigma.unwrap_or(f64::NAN));
        }
        v.iter().enumerate().map(|(i, c)| self.transform(i).unconstrain(*c)).collect()
    }
}

/// Log posterior pieces at one unconstrained point.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    /// Log prior including the Jacobian.
    pub log_prior: f64,
    /// Log likelihood of `d_t` for `t = 2..n`; empty when the path is infeasible.
    pub loglik: Vec<f64>,
    /// `-inf` for infeasible paths.
    pub log_posterior: f64,
}

/// Posterior of the epidemic model given daily deaths, on the unconstrained scale.
#[derive(Debug, Clone)]
pub struct EpiPosterior {
    model: EpiModel,
    deaths: Vec<u64>,
    ln_fact: Vec<f64>,
    priors: PriorSpec,
    layout: ParamLayout,
}

impl EpiPosterior {
    pub fn new(model: EpiModel, deaths: Vec<u64>, priors: PriorSpec) -> Result<Self, ObsError> {
        let cfg = &model.config;
        if deaths.len() != cfg.n {
            return Err(ObsError::InvalidInput(format!(
                "{} death counts for a model of {} days",
                deaths.len(),
                cfg.n
            )));
        }
        priors.validate()?;
        if priors.ifr_means.len() != cfg.n_ifr_segments() {
            return Err(ObsError::InvalidInput(format!(
                "{} IFR prior means for {} IFR segments",
                priors.ifr_means.len(),
                cfg.n_ifr_segments()
            )));
        }
        let n_ifrs = if priors.is_point_mass() { 0 } else { cfg.n_ifr_segments() };
        let layout = ParamLayout::new(cfg.n_segments(), n_ifrs, cfg.likelihood);
        Ok(Self {
            model,
            ln_fact: deaths.iter().map(|d| ln_factorial(*d)).collect(),
            deaths,
            priors,
            layout,
        })
    }

    pub fn model(&self) -> &EpiModel {
        &self.model
    }

    pub fn deaths(&self) -> &[u64] {
        &self.deaths
    }

    pub fn priors(&self) -> &PriorSpec {
        &self.priors
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    /// Number of free sampled scalars.
    pub fn n_free(&self) -> usize {
        self.layout.dim()
    }

    pub fn to_params(&self, x: &[f64]) -> ParamVector {
        self.layout.to_params(x, &self.priors.ifr_means)
    }

    pub fn paths(&self, x: &[f64]) -> Option<LatentPaths> {
        self.model.simulate(&self.to_params(x)).ok()
    }

    fn prior_of(&self, i: usize) -> super::Prior {
        let l = &self.layout;
        if i < l.n_lambdas {
            self.priors.lambda
        } else if i < l.n_lambdas + l.n_ifrs {
            self.priors.ifr_prior(i - l.n_lambdas)
        } else if Some(i) == l.psi_index() {
            self.priors.psi
        } else if i == l.c_init_index() {
            self.priors.c_init
        } else {
            self.priors.sigma
        }
    }

    pub fn log_prior(&self, x: &[f64]) -> f64 {
        x.iter()
            .enumerate()
            .map(|(i, v)| {
                let t = self.layout.transform(i);
                self.prior_of(i).logpdf(t.constrain(*v)) + t.log_jacobian(*v)
            })
            .sum()
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<Evaluation, ObsError> {
        if x.len() != self.layout.dim() {
            return Err(ObsError::InvalidInput(format!(
                "expected {} unconstrained values, got {}",
                self.layout.dim(),
                x.len()
            )));
        }
        let log_prior = self.log_prior(x);
        if log_prior.is_nan() || log_prior == f64::INFINITY {
            return Err(ObsError::Internal(format!("log prior is {log_prior} at {x:?}")));
        }
        let infeasible = Evaluation {
            log_prior,
            loglik: Vec::new(),
            log_posterior: f64::NEG_INFINITY,
        };
        if log_prior == f64::NEG_INFINITY {
            return Ok(infeasible);
        }
        let params = self.to_params(x);
        let paths = match self.model.simulate(&params) {
            Ok(p) => p,
            Err(_) => return Ok(infeasible),
        };
        let loglik = self.pointwise(&paths, &params)?;
        let total: f64 = loglik.iter().sum();
        Ok(Evaluation {
            log_prior,
            log_posterior: log_prior + total,
            loglik,
        })
    }

    fn pointwise(&self, paths: &LatentPaths, params: &ParamVector) -> Result<Vec<f64>, ObsError> {
        let likelihood = self.model.config.likelihood;
        (2..=self.model.config.n)
            .map(|t| {
                let d = self.deaths[t - 1];
                let theta = paths.expected_deaths[t - 1];
                let value = if theta == 0.0 {
                    if d == 0 {
                        0.0
                    } else {
                        f64::NEG_INFINITY
                    }
                } else {
                    match likelihood {
                        Likelihood::NegativeBinomial => negbin_logpmf_with(d, self.ln_fact[t - 1], theta, params.psi),
                        Likelihood::PoissonExponential => negbin_logpmf_with(d, self.ln_fact[t - 1], theta, 1.0),
                        Likelihood::PoissonLogNormal => {
                            poisson_lognormal_logpmf(d, theta, params.sigma.unwrap_or(f64::NAN))
                        }
                    }
                };
                if value.is_nan() || value == f64::INFINITY {
                    return Err(ObsError::Numerical {
                        day: Some(t),
                        message: format!("log likelihood {value} for d={d}, θ={theta}"),
                    });
                }
                Ok(value)
            })
            .collect()
    }

    /// Unconstrained point at the prior medians.
    pub fn prior_median_point(&self) -> Vec<f64> {
        (0..self.layout.dim())
            .map(|i| self.layout.transform(i).unconstrain(self.prior_of(i).median()))
            .collect()
    }

    /// Prior medians, with every rate halved until the path is feasible.
    pub fn feasible_start(&self) -> Vec<f64> {
        let mut x = self.prior_median_point();
        for _ in 0..40 {
            if self.log_density(&x).is_finite() {
                break;
            }
            x[..self.layout.n_lambdas].iter_mut().for_each(|v| *v -= std::f64::consts::LN_2);
        }
        x
    }
}

impl LogDensity for EpiPosterior {
    fn dim(&self) -> usize {
        self.layout.dim()
    }

    /// Non-finite evaluation errors surface as NaN, which the samplers treat as divergent.
    fn log_density(&self, x: &[f64]) -> f64 {
        self.evaluate(x).map_or(f64::NAN, |e| e.log_posterior)
    }

    fn initial_point(&self) -> Vec<f64> {
        self.feasible_start()
    }

    fn param_names(&self) -> Vec<String> {
        self.layout.names()
    }

    fn constrain(&self, x: &[f64]) -> Vec<f64> {
        self.layout.constrain(x)
    }

    fn pointwise_loglik(&self, x: &[f64]) -> Option<Vec<f64>> {
        self.evaluate(x).ok().filter(|e| e.log_posterior.is_finite()).map(|e| e.loglik)
    }

    fn log_prior(&self, x: &[f64]) -> Option<f64> {
        Some(EpiPosterior::log_prior(self, x))
    }
}
