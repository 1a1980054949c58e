use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::ChainDraws;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DiagnosticsError {
    #[error("chains have unequal lengths")]
    UnequalLengths,
    #[error("need at least 4 split chains of length >= 2, got {splits} of length {len}")]
    TooFewSplits { splits: usize, len: usize },
}

/// Posterior summary and convergence diagnostics for one parameter.
///
/// `None` marks a diagnostic that is undefined, e.g. for a constant chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamDiagnostics {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub q025: f64,
    pub q50: f64,
    pub q975: f64,
    pub rhat: Option<f64>,
    pub ess_bulk: Option<f64>,
    pub ess_tail: Option<f64>,
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn sample_var(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() as f64 - 1.0)
}

/// Type-7 (linear interpolation) sample quantile.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, q)
}

fn quantile_sorted(v: &[f64], q: f64) -> f64 {
    let pos = q * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}

fn split(chains: &[Vec<f64>]) -> Vec<Vec<f64>> {
    chains
        .iter()
        .flat_map(|c| {
            let half = c.len() / 2;
            [c[..half].to_vec(), c[c.len() - half..].to_vec()]
        })
        .collect()
}

fn check(chains: &[Vec<f64>]) -> Result<(), DiagnosticsError> {
    let len = chains.first().map_or(0, Vec::len);
    if chains.iter().any(|c| c.len() != len) {
        return Err(DiagnosticsError::UnequalLengths);
    }
    if chains.len() * 2 < 4 || len < 4 {
        return Err(DiagnosticsError::TooFewSplits {
            splits: chains.len() * 2,
            len: len / 2,
        });
    }
    Ok(())
}

/// Normal scores of the pooled fractional ranks, ties averaged.
fn rank_normalize(chains: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let pooled: Vec<f64> = chains.iter().flatten().copied().collect();
    let s = pooled.len();
    let mut order: Vec<usize> = (0..s).collect();
    order.sort_by(|a, b| pooled[*a].total_cmp(&pooled[*b]));
    let mut rank = vec![0.0; s];
    let mut i = 0;
    while i < s {
        let mut j = i;
        while j + 1 < s && pooled[order[j + 1]] == pooled[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            rank[order[k]] = avg;
        }
        i = j + 1;
    }
    let normal = Normal::standard();
    let z: Vec<f64> = rank
        .iter()
        .map(|r| normal.inverse_cdf((r - 0.375) / (s as f64 + 0.25)))
        .collect();
    let mut out = Vec::with_capacity(chains.len());
    let mut offset = 0;
    for c in chains {
        out.push(z[offset..offset + c.len()].to_vec());
        offset += c.len();
    }
    out
}

fn basic_rhat(chains: &[Vec<f64>]) -> Option<f64> {
    let n = chains[0].len() as f64;
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let vars: Vec<f64> = chains.iter().map(|c| sample_var(c)).collect();
    if vars.iter().any(|v| *v <= 0.0 || !v.is_finite()) {
        return None;
    }
    let w = mean(&vars);
    let b = n * sample_var(&means);
    Some((((n - 1.0) / n * w + b / n) / w).sqrt())
}

/// Effective sample size from Geyer's initial monotone sequence over the
/// combined-chain autocorrelation.
fn basic_ess(chains: &[Vec<f64>]) -> Option<f64> {
    let m = chains.len();
    let n = chains[0].len();
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let vars: Vec<f64> = chains.iter().map(|c| sample_var(c)).collect();
    if vars.iter().any(|v| *v <= 0.0 || !v.is_finite()) {
        return None;
    }
    let mean_var = mean(&vars);
    let var_plus = mean_var * (n as f64 - 1.0) / n as f64 + if m > 1 { sample_var(&means) } else { 0.0 };
    let acov = |lag: usize| -> f64 {
        chains
            .iter()
            .zip(&means)
            .map(|(c, mu)| (0..n - lag).map(|t| (c[t] - mu) * (c[t + lag] - mu)).sum::<f64>() / n as f64)
            .sum::<f64>()
            / m as f64
    };
    let mut rho = vec![0.0; n + 1];
    rho[0] = 1.0;
    let mut even = 1.0;
    let mut odd = 1.0 - (mean_var - acov(1)) / var_plus;
    rho[1] = odd;
    let mut s = 1;
    while s + 4 < n && even + odd > 0.0 {
        even = 1.0 - (mean_var - acov(s + 1)) / var_plus;
        odd = 1.0 - (mean_var - acov(s + 2)) / var_plus;
        if even + odd >= 0.0 {
            rho[s + 1] = even;
            rho[s + 2] = odd;
        }
        s += 2;
    }
    let max_s = s;
    if even > 0.0 {
        rho[max_s + 1] = even;
    }
    let mut s = 1;
    while s + 3 <= max_s {
        if rho[s + 1] + rho[s + 2] > rho[s - 1] + rho[s] {
            rho[s + 1] = (rho[s - 1] + rho[s]) / 2.0;
            rho[s + 2] = rho[s + 1];
        }
        s += 2;
    }
    let total = (m * n) as f64;
    let tau = -1.0 + 2.0 * rho[..max_s].iter().sum::<f64>() + rho[max_s + 1];
    Some((total / tau).min(total * total.log10()))
}

/// Autocorrelation-based ESS of a single series; `None` for a constant series.
pub fn series_ess(x: &[f64]) -> Option<f64> {
    if x.len() < 4 {
        return None;
    }
    basic_ess(&[x.to_vec()])
}

/// Rank-normalised split-Rhat: the larger of the bulk and folded values.
pub fn split_rhat(chains: &[Vec<f64>]) -> Result<Option<f64>, DiagnosticsError> {
    check(chains)?;
    let halves = split(chains);
    let bulk = basic_rhat(&rank_normalize(&halves));
    let med = quantile(&halves.concat(), 0.5);
    let folded: Vec<Vec<f64>> = halves.iter().map(|c| c.iter().map(|v| (v - med).abs()).collect()).collect();
    let tail = basic_rhat(&rank_normalize(&folded));
    Ok(match (bulk, tail) {
        (Some(b), Some(t)) => Some(b.max(t)),
        (b, t) => b.or(t),
    })
}

/// Bulk effective sample size on rank-normalised split chains.
pub fn ess_bulk(chains: &[Vec<f64>]) -> Result<Option<f64>, DiagnosticsError> {
    check(chains)?;
    Ok(basic_ess(&rank_normalize(&split(chains))))
}

/// Tail effective sample size: the smaller ESS of the 5% and 95% quantile indicators.
pub fn ess_tail(chains: &[Vec<f64>]) -> Result<Option<f64>, DiagnosticsError> {
    check(chains)?;
    let halves = split(chains);
    let pooled = halves.concat();
    let ess_at = |q: f64| {
        let cut = quantile(&pooled, q);
        let ind: Vec<Vec<f64>> = halves
            .iter()
            .map(|c| c.iter().map(|v| if *v <= cut { 1.0 } else { 0.0 }).collect())
            .collect();
        basic_ess(&ind)
    };
    Ok(match (ess_at(0.05), ess_at(0.95)) {
        (Some(a), Some(b)) => Some(a.min(b)),
        _ => None,
    })
}

/// Summaries on the constrained scale for every parameter.
pub fn diagnostics(chains: &[ChainDraws]) -> Result<Vec<ParamDiagnostics>, DiagnosticsError> {
    let Some(first) = chains.first() else {
        return Err(DiagnosticsError::TooFewSplits { splits: 0, len: 0 });
    };
    (0..first.dim())
        .map(|p| {
            let cols: Vec<Vec<f64>> = chains.iter().map(|c| c.constrained_column(p)).collect();
            summarize(&first.names[p], &cols)
        })
        .collect()
}

/// Summary of one scalar across chains.
pub fn summarize(name: &str, chains: &[Vec<f64>]) -> Result<ParamDiagnostics, DiagnosticsError> {
    check(chains)?;
    let mut pooled: Vec<f64> = chains.concat();
    pooled.sort_by(f64::total_cmp);
    let sd = sample_var(&pooled).sqrt();
    Ok(ParamDiagnostics {
        name: name.to_string(),
        mean: mean(&pooled),
        sd,
        q025: quantile_sorted(&pooled, 0.025),
        q50: quantile_sorted(&pooled, 0.5),
        q975: quantile_sorted(&pooled, 0.975),
        rhat: split_rhat(chains)?,
        ess_bulk: ess_bulk(chains)?,
        ess_tail: ess_tail(chains)?,
    })
}
