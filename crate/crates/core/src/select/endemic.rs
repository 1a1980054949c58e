use serde::{Deserialize, Serialize};

use super::SelectError;

/// Normal quantile bounding a central 50% interval.
const Z50: f64 = 0.674_489_750_196_081_7;

/// Per-day covariance and correlation across draws between `λ_t` and `τ S_t / N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndemicityReport {
    pub covariance: Vec<f64>,
    /// Standard error of the covariance estimate.
    pub covariance_se: Vec<f64>,
    /// `None` where either factor has zero variance.
    pub correlation: Vec<Option<f64>>,
    /// First day (1-based) whose 50% covariance interval lies below zero.
    pub first_negative_day: Option<usize>,
}

/// `lambda[m][t - 1]` and `susceptible[m][t - 1]` hold draw m on day t.
pub fn endemicity_diagnostic(
    lambda: &[Vec<f64>],
    susceptible: &[Vec<f64>],
    tau: f64,
    population: f64,
) -> Result<EndemicityReport, SelectError> {
    let m = lambda.len();
    if m < 2 || susceptible.len() != m {
        return Err(SelectError::InvalidInput("need at least two matching draws".into()));
    }
    let n = lambda[0].len();
    if lambda.iter().chain(susceptible).any(|r| r.len() != n) {
        return Err(SelectError::InvalidInput("every draw must cover the same days".into()));
    }
    let mf = m as f64;
    let mut covariance = Vec::with_capacity(n);
    let mut covariance_se = Vec::with_capacity(n);
    let mut correlation = Vec::with_capacity(n);
    for t in 0..n {
        let a: Vec<f64> = lambda.iter().map(|r| r[t]).collect();
        let b: Vec<f64> = susceptible.iter().map(|r| tau * r[t] / population).collect();
        let ma = a.iter().sum::<f64>() / mf;
        let mb = b.iter().sum::<f64>() / mf;
        let (mut sab, mut saa, mut sbb, mut m22) = (0.0, 0.0, 0.0, 0.0);
        for (x, y) in a.iter().zip(&b) {
            let (dx, dy) = (x - ma, y - mb);
            sab += dx * dy;
            saa += dx * dx;
            sbb += dy * dy;
            m22 += dx * dx * dy * dy;
        }
        let cov = sab / (mf - 1.0);
        let biased = sab / mf;
        covariance.push(cov);
        covariance_se.push(((m22 / mf - biased * biased).max(0.0) / mf).sqrt());
        correlation.push((saa > 0.0 && sbb > 0.0).then(|| sab / (saa * sbb).sqrt()));
    }
    let first_negative_day = covariance
        .iter()
        .zip(&covariance_se)
        .position(|(c, se)| c + Z50 * se < 0.0)
        .map(|i| i + 1);
    Ok(EndemicityReport {
        covariance,
        covariance_se,
        correlation,
        first_negative_day,
    })
}
