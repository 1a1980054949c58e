use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Gamma as GammaDist};
use statrs::function::gamma::ln_gamma;

use super::ObsError;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// A univariate prior density on the constrained scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Prior {
    LogNormal { mu: f64, sigma: f64 },
    /// Shape/rate parameterisation.
    Gamma { shape: f64, rate: f64 },
    Normal { mean: f64, sd: f64 },
}

impl Prior {
    pub fn logpdf(&self, x: f64) -> f64 {
        match *self {
            Prior::LogNormal { mu, sigma } => {
                if x <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                let z = (x.ln() - mu) / sigma;
                -0.5 * z * z - x.ln() - sigma.ln() - LN_SQRT_2PI
            }
            Prior::Gamma { shape, rate } => {
                if x <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * x.ln() - rate * x
            }
            Prior::Normal { mean, sd } => {
                let z = (x - mean) / sd;
                -0.5 * z * z - sd.ln() - LN_SQRT_2PI
            }
        }
    }

    pub fn median(&self) -> f64 {
        match *self {
            Prior::LogNormal { mu, .. } => mu.exp(),
            Prior::Gamma { shape, rate } => GammaDist::new(shape, rate)
                .map(|g| g.inverse_cdf(0.5))
                .unwrap_or(shape / rate),
            Prior::Normal { mean, .. } => mean,
        }
    }

    fn validate(&self, name: &str) -> Result<(), ObsError> {
        let ok = match *self {
            Prior::LogNormal { mu, sigma } => mu.is_finite() && sigma > 0.0 && sigma.is_finite(),
            Prior::Gamma { shape, rate } => shape > 0.0 && rate > 0.0 && shape.is_finite() && rate.is_finite(),
            Prior::Normal { mean, sd } => mean.is_finite() && sd > 0.0 && sd.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(ObsError::InvalidInput(format!("{name} prior has invalid hyperparameters: {self:?}")))
        }
    }
}

/// Priors for the sampled parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub lambda: Prior,
    pub psi: Prior,
    pub c_init: Prior,
    /// Prior on the Poisson-LogNormal scale σ; a placeholder, not an elicited value.
    pub sigma: Prior,
    /// Gaussian prior means for the IFR segments.
    pub ifr_means: Vec<f64>,
    /// Gaussian prior sd for every IFR; `0` fixes the IFRs at their means.
    pub ifr_sd: f64,
}

impl PriorSpec {
    pub fn new(ifr_means: Vec<f64>) -> Self {
        Self {
            lambda: Prior::LogNormal { mu: 0.0, sigma: 1.0 },
            psi: Prior::Gamma { shape: 2.0, rate: 0.125 },
            c_init: Prior::Gamma { shape: 2.0, rate: 0.0625 },
            sigma: Prior::Gamma { shape: 2.0, rate: 1.0 },
            ifr_means,
            ifr_sd: 1e-4,
        }
    }

    /// IFRs held at their prior means instead of sampled.
    pub fn is_point_mass(&self) -> bool {
        self.ifr_sd == 0.0
    }

    pub fn ifr_prior(&self, b: usize) -> Prior {
        Prior::Normal {
            mean: self.ifr_means[b],
            sd: self.ifr_sd,
        }
    }

    pub fn validate(&self) -> Result<(), ObsError> {
        self.lambda.validate("lambda")?;
        self.psi.validate("psi")?;
        self.c_init.validate("c_init")?;
        self.sigma.validate("sigma")?;
        if !(self.ifr_sd >= 0.0 && self.ifr_sd.is_finite()) {
            return Err(ObsError::InvalidInput(format!("IFR prior sd must be >= 0, got {}", self.ifr_sd)));
        }
        if self.ifr_means.iter().any(|p| !(*p > 0.0 && *p < 1.0)) {
            return Err(ObsError::InvalidInput(format!(
                "IFR prior means must lie in (0, 1): {:?}",
                self.ifr_means
            )));
        }
        Ok(())
    }
}

/// Recorded cases by day and age group, with the reference IFR per group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgeCaseMatrix {
    /// `counts[t - 1][k]` is `c_{t,k}`.
    pub counts: Vec<[f64; 4]>,
    /// Reference IFR `p_k^(0)` per age group.
    pub reference_ifr: [f64; 4],
}

/// Case-weighted IFR per day: `p*_t = Σ_k p0_k c_{t,k} / Σ_i c_{t,i}`.
pub fn daily_ifr(acm: &AgeCaseMatrix, t: usize) -> Result<f64, ObsError> {
    let row = acm
        .counts
        .get(t.wrapping_sub(1))
        .ok_or_else(|| ObsError::Elicitation(format!("no age-group counts for day {t}")))?;
    if row.iter().any(|c| !(*c >= 0.0 && c.is_finite())) {
        return Err(ObsError::Elicitation(format!("negative or non-finite count on day {t}")));
    }
    let total: f64 = row.iter().sum();
    if total <= 0.0 {
        return Err(ObsError::Elicitation(format!("no recorded cases in any age group on day {t}")));
    }
    Ok(row.iter().zip(&acm.reference_ifr).map(|(c, p)| p * c / total).sum())
}

/// Prior mean of each IFR segment: the average of `p*_t` over `[l_b, l_{b+1} - 1]`.
pub fn elicit_ifr(acm: &AgeCaseMatrix, ifr_breaks: &[usize]) -> Result<Vec<f64>, ObsError> {
    if ifr_breaks.len() < 2 || ifr_breaks.windows(2).any(|w| w[0] >= w[1]) || ifr_breaks[0] < 1 {
        return Err(ObsError::InvalidInput(format!(
            "IFR break-points must be strictly increasing from day 1: {ifr_breaks:?}"
        )));
    }
    ifr_breaks
        .windows(2)
        .map(|w| {
            let days = w[0]..w[1];
            let len = days.len() as f64;
            let sum = days.map(|t| daily_ifr(acm, t)).sum::<Result<f64, _>>()?;
            Ok(sum / len)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const P0: [f64; 4] = [0.00002, 0.0005, 0.005, 0.09];

    #[test]
    fn lognormal_at_one() {
        let p = Prior::LogNormal { mu: 0.0, sigma: 1.0 };
        assert_abs_diff_eq!(p.logpdf(1.0), -LN_SQRT_2PI, epsilon = 1e-15);
        assert_eq!(p.median(), 1.0);
    }

    #[test]
    fn gamma_density_closed_form() {
        let p = Prior::Gamma { shape: 2.0, rate: 0.125 };
        // rate² x e^{-rate x}
        let x: f64 = 3.0;
        assert_abs_diff_eq!(p.logpdf(x), (0.125f64.powi(2) * x * (-0.125 * x).exp()).ln(), epsilon = 1e-13);
        assert_eq!(p.logpdf(-1.0), f64::NEG_INFINITY);
    }

    #[test]
    fn single_group_collapses_to_reference() {
        for k in 0..4 {
            let mut row = [0.0; 4];
            row[k] = 17.0;
            let acm = AgeCaseMatrix {
                counts: vec![row; 20],
                reference_ifr: P0,
            };
            for m in elicit_ifr(&acm, &[1, 8, 21]).unwrap() {
                assert_abs_diff_eq!(m, P0[k], epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn equal_groups_average_the_reference() {
        let acm = AgeCaseMatrix {
            counts: vec![[5.0; 4]; 10],
            reference_ifr: P0,
        };
        let mean = P0.iter().sum::<f64>() / 4.0;
        assert_abs_diff_eq!(elicit_ifr(&acm, &[1, 11]).unwrap()[0], mean, epsilon = 1e-15);
    }

    #[test]
    fn two_day_segment_averages_days() {
        let acm = AgeCaseMatrix {
            counts: vec![[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]],
            reference_ifr: P0,
        };
        assert_abs_diff_eq!(elicit_ifr(&acm, &[1, 3]).unwrap()[0], (P0[0] + P0[1]) / 2.0, epsilon = 1e-15);
    }

    #[test]
    fn empty_day_is_named() {
        let acm = AgeCaseMatrix {
            counts: vec![[1.0; 4], [0.0; 4], [1.0; 4]],
            reference_ifr: P0,
        };
        match elicit_ifr(&acm, &[1, 4]) {
            Err(ObsError::Elicitation(msg)) => assert!(msg.contains("day 2"), "{msg}"),
            other => panic!("expected elicitation error, got {other:?}"),
        }
    }
}
