use serde::{Deserialize, Serialize};

use super::{PhaseError, Trajectory};

/// Trailing-window test for a sustained downward drift.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DepartureRule {
    pub window: usize,
    /// Slope t-statistic must fall below `-t_crit`.
    pub t_crit: f64,
    /// Consecutive flagged windows required.
    pub run: usize,
}

impl Default for DepartureRule {
    fn default() -> Self {
        Self { window: 28, t_crit: 3.0, run: 7 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConservedReport {
    pub q: Vec<f64>,
    /// Running mean of `Q` up to each position.
    pub running_mean: Vec<f64>,
    /// Position where the first qualifying run of flagged windows starts.
    pub departure: Option<usize>,
    /// `(mean(Q) - Q_0)^2`.
    pub deviation: f64,
}

/// `Q_t = S_t + I_t - log S_t / (λ_t τ)` along a trajectory.
pub fn conserved_q(
    traj: &Trajectory,
    lambdas: &[f64],
    tau: f64,
    rule: &DepartureRule,
) -> Result<ConservedReport, PhaseError> {
    if lambdas.len() != traj.len() {
        return Err(PhaseError::InvalidInput(format!(
            "{} rates for {} points",
            lambdas.len(),
            traj.len()
        )));
    }
    if traj.is_empty() {
        return Err(PhaseError::InvalidInput("empty trajectory".into()));
    }
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(PhaseError::InvalidInput(format!("tau {tau}")));
    }
    let mut q = Vec::with_capacity(traj.len());
    for (index, (&[s, i], &lambda)) in traj.points.iter().zip(lambdas).enumerate() {
        if s <= 0.0 {
            return Err(PhaseError::Domain { index, s });
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(PhaseError::InvalidInput(format!("lambda {lambda} at position {index}")));
        }
        q.push(s + i - s.ln() / (lambda * tau));
    }
    let mut running_mean = Vec::with_capacity(q.len());
    let mut sum = 0.0;
    for (k, v) in q.iter().enumerate() {
        sum += v;
        running_mean.push(sum / (k + 1) as f64);
    }
    let mean = sum / q.len() as f64;
    Ok(ConservedReport {
        departure: departure_index(&q, rule),
        deviation: (mean - q[0]).powi(2),
        running_mean,
        q,
    })
}

/// OLS slope and its t-statistic for `y` against `0..y.len()`.
fn slope_t(y: &[f64]) -> (f64, f64) {
    let n = y.len() as f64;
    let xbar = (n - 1.0) / 2.0;
    let ybar = y.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (k, v) in y.iter().enumerate() {
        let dx = k as f64 - xbar;
        sxx += dx * dx;
        sxy += dx * (v - ybar);
    }
    let slope = sxy / sxx;
    let rss: f64 = y
        .iter()
        .enumerate()
        .map(|(k, v)| (v - ybar - slope * (k as f64 - xbar)).powi(2))
        .sum();
    let se = (rss / (n - 2.0) / sxx).sqrt();
    let t = if se > 0.0 {
        slope / se
    } else if slope < 0.0 {
        f64::NEG_INFINITY
    } else {
        0.0
    };
    (slope, t)
}

/// First window end of the first run of `rule.run` consecutive windows whose
/// slope is negative with t-statistic below `-rule.t_crit`.
pub fn departure_index(q: &[f64], rule: &DepartureRule) -> Option<usize> {
    if rule.window < 3 || rule.run == 0 || q.len() < rule.window {
        return None;
    }
    let mut streak = 0;
    for end in rule.window - 1..q.len() {
        let (slope, t) = slope_t(&q[end + 1 - rule.window..=end]);
        if slope < 0.0 && t < -rule.t_crit {
            streak += 1;
            if streak == rule.run {
                return Some(end + 1 - rule.run);
            }
        } else {
            streak = 0;
        }
    }
    None
}
