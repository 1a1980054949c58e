use serde::{Deserialize, Serialize};

use super::SelectError;
use crate::inference::{simulated_annealing, AnnealSchedule, ChainDraws, LogDensity};

/// Information criteria and, once bridge sampling has run, the log evidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelScore {
    pub aic: f64,
    pub bic: f64,
    pub dic: f64,
    pub dic2: f64,
    pub waic: f64,
    /// `mean dev - dev(mean)`.
    pub p_dic: f64,
    /// `var(dev) / 2`.
    pub p_dic2: f64,
    pub p_waic: f64,
    pub lppd: f64,
    pub mean_deviance: f64,
    pub log_ml: Option<f64>,
    pub log_ml_error: Option<f64>,
    pub k: usize,
    pub n_obs: usize,
    pub max_loglik: f64,
}

/// Criteria from an `M × n` per-observation log-likelihood matrix and the
/// deviance at the plug-in point.
pub fn criteria_from_loglik(loglik: &[Vec<f64>], dev_at_mean: f64, k: usize) -> Result<ModelScore, SelectError> {
    let m = loglik.len();
    if m < 2 {
        return Err(SelectError::InvalidInput("need at least two draws".into()));
    }
    if k == 0 {
        return Err(SelectError::InvalidInput("parameter count must be positive".into()));
    }
    let n = loglik[0].len();
    if n == 0 || loglik.iter().any(|r| r.len() != n) {
        return Err(SelectError::InvalidInput("log-likelihood rows must share a positive length".into()));
    }
    let mf = m as f64;
    let dev: Vec<f64> = loglik.iter().map(|r| -2.0 * r.iter().sum::<f64>()).collect();
    let mean_dev = dev.iter().sum::<f64>() / mf;
    let var_dev = dev.iter().map(|d| (d - mean_dev).powi(2)).sum::<f64>() / (mf - 1.0);
    let max_loglik = dev.iter().map(|d| -0.5 * d).fold(f64::NEG_INFINITY, f64::max);

    let mut lppd = 0.0;
    let mut p_waic = 0.0;
    for t in 0..n {
        let col: Vec<f64> = loglik.iter().map(|r| r[t]).collect();
        let max = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        lppd += max + (col.iter().map(|v| (v - max).exp()).sum::<f64>() / mf).ln();
        let mean = col.iter().sum::<f64>() / mf;
        p_waic += col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (mf - 1.0);
    }
    let p_dic = mean_dev - dev_at_mean;
    let p_dic2 = var_dev / 2.0;
    Ok(ModelScore {
        aic: 2.0 * k as f64 - 2.0 * max_loglik,
        bic: k as f64 * (n as f64).ln() - 2.0 * max_loglik,
        dic: dev_at_mean + 2.0 * p_dic,
        dic2: mean_dev + p_dic2,
        waic: -2.0 * (lppd - p_waic),
        p_dic,
        p_dic2,
        p_waic,
        lppd,
        mean_deviance: mean_dev,
        log_ml: None,
        log_ml_error: None,
        k,
        n_obs: n,
        max_loglik,
    })
}

/// Criteria over pooled chains. The DIC plug-in point is the posterior mean
/// in unconstrained space; `max_loglik` may be raised by an external refinement.
pub fn information_criteria<T: LogDensity + ?Sized>(
    target: &T,
    chains: &[ChainDraws],
    k: usize,
    refined_max_loglik: Option<f64>,
) -> Result<ModelScore, SelectError> {
    let mut rows = Vec::new();
    for c in chains {
        rows.extend(c.loglik.as_ref().ok_or(SelectError::MissingLoglik)?.iter().cloned());
    }
    let dim = chains.first().map_or(0, ChainDraws::dim);
    let total: usize = chains.iter().map(ChainDraws::len).sum();
    let mut centre = vec![0.0; dim];
    for x in chains.iter().flat_map(|c| &c.draws) {
        for (c, v) in centre.iter_mut().zip(x) {
            *c += v / total as f64;
        }
    }
    let at_mean = target
        .pointwise_loglik(&centre)
        .ok_or_else(|| SelectError::InvalidInput("log likelihood undefined at the posterior mean".into()))?;
    let dev_at_mean = -2.0 * at_mean.iter().sum::<f64>();
    let mut score = criteria_from_loglik(&rows, dev_at_mean, k)?;
    if let Some(best) = refined_max_loglik.filter(|b| *b > score.max_loglik) {
        score.max_loglik = best;
        score.aic = 2.0 * k as f64 - 2.0 * best;
        score.bic = k as f64 * (score.n_obs as f64).ln() - 2.0 * best;
    }
    Ok(score)
}

/// Maximum log likelihood found by annealing from the best retained draw.
pub fn refine_max_loglik<T: LogDensity + ?Sized>(
    target: &T,
    chains: &[ChainDraws],
    schedule: &AnnealSchedule,
    seed: u64,
) -> Option<f64> {
    let total = |x: &[f64]| target.pointwise_loglik(x).map_or(f64::NEG_INFINITY, |v| v.iter().sum());
    let (start, _) = chains
        .iter()
        .flat_map(|c| c.draws.iter().zip(c.loglik.iter().flatten()))
        .map(|(x, ll)| (x, ll.iter().sum::<f64>()))
        .max_by(|a, b| a.1.total_cmp(&b.1))?;
    simulated_annealing(total, start, schedule, seed).ok().map(|r| r.value)
}
