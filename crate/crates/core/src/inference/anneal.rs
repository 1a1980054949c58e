use rand::rngs::ChaCha8Rng;
use rand::{RngExt, SeedableRng};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Geometric cooling schedule `T_k = t0 · cooling^k`.
///
/// The proposal sd shrinks with `sqrt(T_k / t0)`, floored at `min_scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnnealSchedule {
    pub t0: f64,
    pub cooling: f64,
    pub steps: usize,
    pub proposal_sd: f64,
    pub min_scale: f64,
}

impl Default for AnnealSchedule {
    fn default() -> Self {
        Self {
            t0: 1.0,
            cooling: 0.9997,
            steps: 100_000,
            proposal_sd: 0.5,
            min_scale: 1e-4,
        }
    }
}

impl AnnealSchedule {
    pub fn temperature(&self, k: usize) -> f64 {
        self.t0 * self.cooling.powi(k as i32)
    }

    fn validate(&self) -> Result<(), AnnealError> {
        if !(self.t0 > 0.0 && self.cooling > 0.0 && self.cooling < 1.0) {
            return Err(AnnealError::Schedule("need t0 > 0 and cooling in (0, 1)".into()));
        }
        if !(self.proposal_sd > 0.0 && self.min_scale > 0.0) || self.steps == 0 {
            return Err(AnnealError::Schedule("proposal scale and step count must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnnealError {
    #[error("invalid annealing schedule: {0}")]
    Schedule(String),
    #[error("objective is not finite at the initial point")]
    InfeasibleStart,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnealResult {
    /// Best point visited.
    pub x: Vec<f64>,
    pub value: f64,
    pub accepted: usize,
    pub steps: usize,
}

/// Random-walk Metropolis under a decreasing temperature, maximising `f`.
pub fn simulated_annealing(
    f: impl Fn(&[f64]) -> f64,
    init: &[f64],
    schedule: &AnnealSchedule,
    seed: u64,
) -> Result<AnnealResult, AnnealError> {
    schedule.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = init.to_vec();
    let mut fx = f(&x);
    if !fx.is_finite() {
        return Err(AnnealError::InfeasibleStart);
    }
    let mut best = (x.clone(), fx);
    let mut accepted = 0;
    let mut proposal = x.clone();
    for k in 0..schedule.steps {
        let temp = schedule.temperature(k);
        let scale = schedule.proposal_sd * (temp / schedule.t0).sqrt().max(schedule.min_scale);
        for (p, xi) in proposal.iter_mut().zip(&x) {
            *p = xi + scale * rng.sample::<f64, _>(StandardNormal);
        }
        let fp = f(&proposal);
        if !fp.is_finite() {
            continue;
        }
        let delta = fp - fx;
        let u: f64 = rng.random();
        if delta >= 0.0 || u < (delta / temp).exp() {
            x.copy_from_slice(&proposal);
            fx = fp;
            accepted += 1;
            if fx > best.1 {
                best = (x.clone(), fx);
            }
        }
    }
    Ok(AnnealResult {
        x: best.0,
        value: best.1,
        accepted,
        steps: schedule.steps,
    })
}
