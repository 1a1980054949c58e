//! Death-count likelihoods: Negative Binomial and Poisson scale mixtures.

use std::f64::consts::PI;
use std::sync::OnceLock;

use statrs::function::gamma::ln_gamma;

use super::ObsError;
use crate::epi::Likelihood;

/// Gauss-Hermite order used for the Poisson-LogNormal marginal.
pub const HERMITE_ORDER: usize = 40;

/// `log Γ(d + 1)`.
#[inline]
pub fn ln_factorial(d: u64) -> f64 {
    if d < 2 {
        0.0
    } else {
        ln_gamma(d as f64 + 1.0)
    }
}

/// `log Γ(d + ψ) - log Γ(ψ)`, summed directly for small `d` or huge ψ,
/// where the difference of log-gammas would cancel.
#[inline]
fn ln_rising(psi: f64, d: u64) -> f64 {
    if d < 8 || (d < 64 && psi > 1e6) {
        (0..d).map(|j| (psi + j as f64).ln()).sum()
    } else {
        ln_gamma(d as f64 + psi) - ln_gamma(psi)
    }
}

/// Poisson log pmf; `θ = 0` gives `0` for `d = 0` and `-inf` otherwise.
#[inline]
pub fn poisson_logpmf(d: u64, theta: f64) -> f64 {
    if theta == 0.0 {
        return if d == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    d as f64 * theta.ln() - theta - ln_factorial(d)
}

/// Negative Binomial log pmf with mean `θ` and variance `θ + θ²/ψ`.
///
/// `ψ = +inf` is the Poisson limit.
pub fn negbin_logpmf(d: u64, theta: f64, psi: f64) -> Result<f64, ObsError> {
    if !(theta.is_finite() && theta > 0.0) || psi.is_nan() || !(psi > 0.0) {
        return Err(ObsError::InvalidInput(format!(
            "negative binomial needs θ > 0 and ψ > 0, got θ={theta}, ψ={psi}"
        )));
    }
    Ok(negbin_logpmf_unchecked(d, theta, psi))
}

#[inline]
pub(crate) fn negbin_logpmf_unchecked(d: u64, theta: f64, psi: f64) -> f64 {
    negbin_logpmf_with(d, ln_factorial(d), theta, psi)
}

/// As [`negbin_logpmf_unchecked`] with `log d!` supplied by the caller.
#[inline]
pub(crate) fn negbin_logpmf_with(d: u64, ln_fact: f64, theta: f64, psi: f64) -> f64 {
    if theta == 0.0 {
        return if d == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    if psi.is_infinite() {
        return d as f64 * theta.ln() - theta - ln_fact;
    }
    let df = d as f64;
    ln_rising(psi, d) - ln_fact - psi * (theta / psi).ln_1p() + df * (theta.ln() - (psi + theta).ln())
}

/// Log-normal location/scale giving mean `μ` and variance `σ²`:
/// `m = log(μ² / sqrt(μ² + σ²))`, `s² = log(1 + σ²/μ²)`.
pub fn lognormal_moments(mu: f64, sigma: f64) -> (f64, f64) {
    let ratio = (sigma / mu).powi(2);
    let s2 = ratio.ln_1p();
    (mu.ln() - 0.5 * s2, s2)
}

/// Nodes and weights of the physicists' Gauss-Hermite rule (`∫ e^{-x²} f`).
pub fn gauss_hermite(order: usize) -> (Vec<f64>, Vec<f64>) {
    // Newton iteration on the orthonormal Hermite recurrence.
    let mut nodes = vec![0.0; order];
    let mut weights = vec![0.0; order];
    let m = order.div_ceil(2);
    let pim4 = PI.powf(-0.25);
    let nf = order as f64;
    let mut z = 0.0f64;
    for i in 0..m {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.855_75 * (2.0 * nf + 1.0).powf(-0.166_67),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * nodes[0],
            3 => 1.91 * z - 0.91 * nodes[1],
            _ => 2.0 * z - nodes[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 0..order {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        nodes[i] = z;
        nodes[order - 1 - i] = -z;
        weights[i] = 2.0 / (pp * pp);
        weights[order - 1 - i] = weights[i];
    }
    (nodes, weights)
}

fn hermite40() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_hermite(HERMITE_ORDER))
}

/// Poisson whose rate is log-normal with mean `μ` and sd `σ`, marginalised by
/// Gauss-Hermite quadrature over the latent log rate.
pub fn poisson_lognormal_logpmf(d: u64, mu: f64, sigma: f64) -> f64 {
    if mu == 0.0 {
        return if d == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    let (m, s2) = lognormal_moments(mu, sigma);
    let scale = (2.0 * s2).sqrt();
    let (nodes, weights) = hermite40();
    let df = d as f64;
    let terms = nodes.iter().zip(weights).map(|(z, w)| {
        let x = m + scale * z;
        w.ln() + df * x - x.exp()
    });
    log_sum_exp(terms) - 0.5 * PI.ln() - ln_factorial(d)
}

fn log_sum_exp(terms: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = terms.clone().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + terms.map(|t| (t - max).exp()).sum::<f64>().ln()
}

/// Marginal log probability of `d` under a Poisson scale mixture with mean `μ`.
///
/// `PoissonExponential` is the Negative Binomial with `ψ = 1`;
/// `PoissonLogNormal` needs `sigma`. `NegativeBinomial` is rejected here.
pub fn mixture_loglik(d: u64, mu: f64, variant: Likelihood, sigma: Option<f64>) -> Result<f64, ObsError> {
    if !(mu.is_finite() && mu > 0.0) {
        return Err(ObsError::InvalidInput(format!("mixture mean must be positive, got {mu}")));
    }
    match variant {
        Likelihood::PoissonExponential => Ok(negbin_logpmf_unchecked(d, mu, 1.0)),
        Likelihood::PoissonLogNormal => {
            let sigma = sigma
                .filter(|s| *s > 0.0 && s.is_finite())
                .ok_or_else(|| ObsError::InvalidInput("Poisson-LogNormal needs σ > 0".into()))?;
            let value = poisson_lognormal_logpmf(d, mu, sigma);
            if value.is_nan() || value == f64::INFINITY {
                return Err(ObsError::Numerical {
                    day: None,
                    message: format!("Gauss-Hermite marginal non-finite for d={d}, μ={mu}, σ={sigma}"),
                });
            }
            Ok(value)
        }
        Likelihood::NegativeBinomial => Err(ObsError::InvalidInput(
            "the negative binomial is not a fixed-shape mixture; use negbin_logpmf".into(),
        )),
    }
}
