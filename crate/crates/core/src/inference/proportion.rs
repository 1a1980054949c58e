use serde::{Deserialize, Serialize};

use super::diagnostics::quantile;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SmoothError {
    #[error("span must be positive, got {0}")]
    Span(f64),
    #[error("x and y differ in length ({0} vs {1})")]
    Length(usize, usize),
    #[error("need at least 2 distinct points for a local linear fit")]
    TooFewPoints,
    #[error("no posterior draws of total cases")]
    NoDraws,
}

/// Degree-1 local regression with tricube weights, evaluated at `at`.
///
/// Each fit uses the `ceil(span · n)` nearest points (at least two); the
/// bandwidth is the distance to the farthest of them, inflated by `span`
/// when `span > 1`.
pub fn loess_at(x: &[f64], y: &[f64], span: f64, at: &[f64]) -> Result<Vec<f64>, SmoothError> {
    if !(span > 0.0 && span.is_finite()) {
        return Err(SmoothError::Span(span));
    }
    if x.len() != y.len() {
        return Err(SmoothError::Length(x.len(), y.len()));
    }
    let n = x.len();
    if n < 2 {
        return Err(SmoothError::TooFewPoints);
    }
    let q = ((span * n as f64).ceil() as usize).clamp(2, n);
    let mut dist = vec![0.0; n];
    at.iter()
        .map(|&x0| {
            for (d, xi) in dist.iter_mut().zip(x) {
                *d = (xi - x0).abs();
            }
            let mut sorted = dist.clone();
            sorted.sort_by(f64::total_cmp);
            let mut h = sorted[q - 1];
            if span > 1.0 {
                h *= span;
            }
            if h == 0.0 {
                h = f64::MIN_POSITIVE;
            }
            // weighted least squares around x0 for stability
            let (mut sw, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for i in 0..n {
                let u = dist[i] / h;
                if u >= 1.0 {
                    continue;
                }
                let w = (1.0 - u * u * u).powi(3);
                let dx = x[i] - x0;
                sw += w;
                sx += w * dx;
                sy += w * y[i];
                sxx += w * dx * dx;
                sxy += w * dx * y[i];
            }
            let det = sw * sxx - sx * sx;
            if det.abs() <= 1e-12 * sw * sxx.max(f64::MIN_POSITIVE) {
                Ok(sy / sw)
            } else {
                Ok((sxx * sy - sx * sxy) / det)
            }
        })
        .collect()
}

/// Local regression evaluated at the data points.
pub fn loess(x: &[f64], y: &[f64], span: f64) -> Result<Vec<f64>, SmoothError> {
    loess_at(x, y, span, x)
}

/// Second-stage ratio of recorded to total cases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservedProportion {
    /// `ratios[m][t - 1] = c_t / C_t` for draw m; `None` when `C_t = 0`.
    pub ratios: Vec<Vec<Option<f64>>>,
    /// Number of (draw, day) pairs excluded for `C_t = 0`.
    pub excluded: usize,
    /// Posterior median ratio per day; NaN when every draw was excluded.
    pub median: Vec<f64>,
    /// Local-regression smooth of `median` over the days where it is defined.
    pub smoothed: Vec<f64>,
}

/// Ratios of recorded cases to posterior total cases, summarised by a
/// smoothed median. Draws are only read.
pub fn observed_proportion(
    cases: &[f64],
    total_case_draws: &[Vec<f64>],
    span: f64,
) -> Result<ObservedProportion, SmoothError> {
    if total_case_draws.is_empty() {
        return Err(SmoothError::NoDraws);
    }
    let n = cases.len();
    let mut excluded = 0;
    let ratios: Vec<Vec<Option<f64>>> = total_case_draws
        .iter()
        .map(|draw| {
            (0..n)
                .map(|t| {
                    let total = draw.get(t).copied().unwrap_or(0.0);
                    if total == 0.0 {
                        excluded += 1;
                        None
                    } else {
                        Some(cases[t] / total)
                    }
                })
                .collect()
        })
        .collect();
    let median: Vec<f64> = (0..n)
        .map(|t| {
            let vals: Vec<f64> = ratios.iter().filter_map(|r| r[t]).collect();
            if vals.is_empty() {
                f64::NAN
            } else {
                quantile(&vals, 0.5)
            }
        })
        .collect();
    let (xs, ys): (Vec<f64>, Vec<f64>) = median
        .iter()
        .enumerate()
        .filter(|(_, m)| m.is_finite())
        .map(|(t, m)| ((t + 1) as f64, *m))
        .unzip();
    let days: Vec<f64> = (1..=n).map(|t| t as f64).collect();
    let smoothed = loess_at(&xs, &ys, span, &days)?;
    Ok(ObservedProportion {
        ratios,
        excluded,
        median,
        smoothed,
    })
}
