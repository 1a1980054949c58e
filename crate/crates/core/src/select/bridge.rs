use nalgebra::{DMatrix, DVector};
use rand::rngs::ChaCha8Rng;
use rand::{RngExt, SeedableRng};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::SelectError;
use crate::inference::{series_ess, ChainDraws, LogDensity};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BridgeConfig {
    pub seed: u64,
    pub max_iter: usize,
    pub tol: f64,
    /// Proposal draws per retained posterior draw.
    pub proposal_factor: usize,
}

impl Default for BridgeConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            max_iter: 1000,
            tol: 1e-10,
            proposal_factor: 1,
        }
    }
}

/// Log marginal likelihood with its Monte-Carlo standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub log_ml: f64,
    pub error: f64,
    pub iterations: usize,
}

/// Iterative optimal-bridge estimate with a moment-matched Gaussian proposal.
///
/// The first half of every chain fits the proposal; the second half enters
/// the iteration. The error is the square root of the relative mean-squared
/// error, with the posterior term inflated by its autocorrelation.
pub fn bridge_log_ml<T: LogDensity + ?Sized>(
    target: &T,
    chains: &[ChainDraws],
    cfg: &BridgeConfig,
) -> Result<Evidence, SelectError> {
    let mut fit: Vec<&[f64]> = Vec::new();
    let mut iter: Vec<&[f64]> = Vec::new();
    for c in chains {
        let half = c.len() / 2;
        fit.extend(c.draws[..half].iter().map(Vec::as_slice));
        iter.extend(c.draws[half..].iter().map(Vec::as_slice));
    }
    let d = chains.first().map_or(0, ChainDraws::dim);
    if fit.len() < d + 2 || iter.is_empty() {
        return Err(SelectError::InvalidInput(format!(
            "{} draws are too few to fit a {d}-dimensional proposal",
            fit.len()
        )));
    }

    let nf = fit.len() as f64;
    let mean = fit.iter().fold(DVector::zeros(d), |acc, x| acc + DVector::from_column_slice(x)) / nf;
    let mut cov = DMatrix::zeros(d, d);
    for x in &fit {
        let r = DVector::from_column_slice(x) - &mean;
        cov += &r * r.transpose();
    }
    cov /= nf - 1.0;
    let chol = cov
        .clone()
        .cholesky()
        .ok_or_else(|| SelectError::Bridge("posterior covariance is not positive definite".into()))?;
    let l = chol.l();
    let log_det: f64 = 2.0 * l.diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let norm = -0.5 * d as f64 * (2.0 * std::f64::consts::PI).ln() - 0.5 * log_det;
    let proposal_logpdf = |x: &[f64]| {
        let r = DVector::from_column_slice(x) - &mean;
        let z = chol.l().solve_lower_triangular(&r).expect("triangular solve");
        norm - 0.5 * z.norm_squared()
    };

    let n1 = iter.len();
    let n2 = n1 * cfg.proposal_factor.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let proposals: Vec<Vec<f64>> = (0..n2)
        .map(|_| {
            let z = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
            (&mean + &l * z).iter().copied().collect()
        })
        .collect();

    let q11: Vec<f64> = iter.iter().map(|x| target.log_density(x)).collect();
    let q12: Vec<f64> = iter.iter().map(|x| proposal_logpdf(x)).collect();
    let q21: Vec<f64> = proposals.iter().map(|x| sanitize(target.log_density(x))).collect();
    let q22: Vec<f64> = proposals.iter().map(|x| proposal_logpdf(x)).collect();
    if q11.iter().any(|v| !v.is_finite()) {
        return Err(SelectError::Bridge("posterior draw with non-finite log density".into()));
    }
    let l1: Vec<f64> = q11.iter().zip(&q12).map(|(a, b)| a - b).collect();
    let l2: Vec<f64> = q21.iter().zip(&q22).map(|(a, b)| a - b).collect();
    if l2.iter().all(|v| *v == f64::NEG_INFINITY) {
        return Err(SelectError::Bridge("proposal draws all fall outside the posterior support".into()));
    }

    let (s1, s2) = (n1 as f64 / (n1 + n2) as f64, n2 as f64 / (n1 + n2) as f64);
    let mut sorted = l1.clone();
    sorted.sort_by(f64::total_cmp);
    let lstar = sorted[sorted.len() / 2];
    let e1: Vec<f64> = l1.iter().map(|v| (v - lstar).exp()).collect();
    let e2: Vec<f64> = l2.iter().map(|v| (v - lstar).exp()).collect();

    let mut r = 1.0;
    let mut iterations = 0;
    for it in 1..=cfg.max_iter {
        iterations = it;
        let num = e2.iter().map(|e| e / (s1 * e + s2 * r)).sum::<f64>() / n2 as f64;
        let den = e1.iter().map(|e| 1.0 / (s1 * e + s2 * r)).sum::<f64>() / n1 as f64;
        let next = num / den;
        if !(next.is_finite() && next > 0.0) {
            return Err(SelectError::Bridge(format!("iteration {it} produced r = {next}")));
        }
        let change = ((next - r) / next).abs();
        r = next;
        if change < cfg.tol {
            break;
        }
    }
    let log_ml = r.ln() + lstar;

    // f1 over proposal draws, f2 over posterior draws, both at the estimate
    let f1: Vec<f64> = e2.iter().map(|e| (e / r) / (s1 * e / r + s2)).collect();
    let f2: Vec<f64> = e1.iter().map(|e| 1.0 / (s1 * e / r + s2)).collect();
    let rel_var = |f: &[f64]| {
        let m = f.iter().sum::<f64>() / f.len() as f64;
        f.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (f.len() as f64 - 1.0) / (m * m)
    };
    let ess2 = series_ess(&f2).unwrap_or(n1 as f64).min(n1 as f64);
    let re2 = rel_var(&f1) / n2 as f64 + rel_var(&f2) / ess2;
    Ok(Evidence {
        log_ml,
        error: re2.sqrt(),
        iterations,
    })
}

fn sanitize(v: f64) -> f64 {
    if v.is_nan() {
        f64::NEG_INFINITY
    } else {
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BayesFactor {
    pub log_bf: f64,
    pub error: f64,
}

/// `log p(y | a) - log p(y | b)` with errors added in quadrature.
pub fn bayes_factor(a: &Evidence, b: &Evidence) -> BayesFactor {
    BayesFactor {
        log_bf: a.log_ml - b.log_ml,
        error: a.error.hypot(b.error),
    }
}
