//! Synthetic datasets drawn from the model around known parameters.

use chrono::NaiveDate;
use rand::rngs::ChaCha8Rng;
use rand::SeedableRng;
use rand_distr::{Binomial, Distribution, Gamma, LogNormal, Poisson};
use serde::{Deserialize, Serialize};
use seirfit_core::epi::{EpiModel, Likelihood, LatentPaths, ParamVector};
use seirfit_core::obs::lognormal_moments;

use crate::dataset::Dataset;
use crate::error::CliError;

/// Everything needed to regenerate a synthetic dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRecord {
    pub seed: u64,
    pub model: String,
    pub likelihood: Likelihood,
    pub reporting: f64,
    pub params: ParamVector,
    pub paths: LatentPaths,
}

/// Draws `d_t` from the observation model around `θ_t`.
pub fn draw_death(
    rng: &mut ChaCha8Rng,
    likelihood: Likelihood,
    theta: f64,
    params: &ParamVector,
) -> Result<u64, CliError> {
    if theta <= 0.0 {
        return Ok(0);
    }
    let bad = |e: &dyn std::fmt::Display| CliError::stage("simulate", format!("theta {theta}: {e}"));
    let rate = match likelihood {
        Likelihood::NegativeBinomial | Likelihood::PoissonExponential => {
            let psi = if likelihood == Likelihood::PoissonExponential { 1.0 } else { params.psi };
            if psi.is_infinite() {
                theta
            } else {
                Gamma::new(psi, theta / psi).map_err(|e| bad(&e))?.sample(rng)
            }
        }
        Likelihood::PoissonLogNormal => {
            let sigma = params
                .sigma
                .ok_or_else(|| CliError::Config("the log-normal variant needs a true sigma".into()))?;
            let (m, s2) = lognormal_moments(theta, sigma);
            LogNormal::new(m, s2.sqrt()).map_err(|e| bad(&e))?.sample(rng)
        }
    };
    if rate <= 0.0 {
        return Ok(0);
    }
    Ok(Poisson::new(rate).map_err(|e| bad(&e))?.sample(rng) as u64)
}

/// Splits `total` across four groups with the given shares.
fn split_ages(rng: &mut ChaCha8Rng, total: u64, shares: &[f64; 4]) -> Result<[u64; 4], CliError> {
    let mut out = [0u64; 4];
    let mut left = total;
    let mut mass = 1.0;
    for k in 0..3 {
        let p = if mass > 0.0 { (shares[k] / mass).clamp(0.0, 1.0) } else { 0.0 };
        let draw = Binomial::new(left, p).map_err(|e| CliError::stage("simulate", e))?.sample(rng);
        out[k] = draw;
        left -= draw;
        mass -= shares[k];
    }
    out[3] = left;
    Ok(out)
}

/// Simulates paths at `truth`, then draws every death count (days in order),
/// then the recorded cases as a Binomial thinning of rounded `C_t`, then the
/// age split. One ChaCha8 stream seeded with `seed` drives all three.
pub fn generate_synthetic(
    model: &EpiModel,
    truth: &ParamVector,
    reporting: f64,
    age_shares: [f64; 4],
    start: NaiveDate,
    seed: u64,
) -> Result<(Dataset, TruthRecord), CliError> {
    if !(0.0..=1.0).contains(&reporting) {
        return Err(CliError::Config(format!("reporting probability {reporting} outside [0, 1]")));
    }
    let share_sum: f64 = age_shares.iter().sum();
    if age_shares.iter().any(|s| !(*s >= 0.0)) || (share_sum - 1.0).abs() > 1e-9 {
        return Err(CliError::Config(format!("age shares {age_shares:?} must be non-negative and sum to 1")));
    }
    let paths = model
        .simulate(truth)
        .map_err(|e| CliError::stage("simulate", format!("true parameters give an infeasible path: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let likelihood = model.config.likelihood;
    let deaths = paths
        .expected_deaths
        .iter()
        .map(|&theta| draw_death(&mut rng, likelihood, theta, truth))
        .collect::<Result<Vec<_>, _>>()?;
    let cases = paths
        .cases
        .iter()
        .map(|c| {
            let total = c.round().max(0.0) as u64;
            Binomial::new(total, reporting)
                .map(|b| b.sample(&mut rng))
                .map_err(|e| CliError::stage("simulate", e))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let cases_by_age = cases
        .iter()
        .map(|&c| split_ages(&mut rng, c, &age_shares))
        .collect::<Result<Vec<_>, _>>()?;
    let dataset = Dataset {
        start,
        deaths,
        cases,
        cases_by_age,
        vaccinations: model.vaccinations.clone(),
    };
    let record = TruthRecord {
        seed,
        model: model.config.flags.label(),
        likelihood,
        reporting,
        params: truth.clone(),
        paths,
    };
    Ok((dataset, record))
}
