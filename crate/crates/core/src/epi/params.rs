use serde::{Deserialize, Serialize};

use super::EpiError;

/// Model parameters on their natural (constrained) scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    /// Infection rates `λ_(1..J)` (per day).
    pub lambdas: Vec<f64>,
    /// Infection fatality ratios `p_(1..B)`.
    pub ifrs: Vec<f64>,
    /// Negative Binomial dispersion ψ.
    pub psi: f64,
    /// Common value of the first `τ + h` daily cases.
    pub c_init: f64,
    /// Scale of the Poisson-LogNormal mixing distribution.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
}

impl ParamVector {
    pub fn validate(&self, n_segments: usize, n_ifr_segments: usize) -> Result<(), EpiError> {
        let bad = |msg: String| Err(EpiError::InvalidParams(msg));
        if self.lambdas.len() != n_segments {
            return bad(format!("expected {n_segments} rates, got {}", self.lambdas.len()));
        }
        if self.ifrs.len() != n_ifr_segments {
            return bad(format!("expected {n_ifr_segments} IFRs, got {}", self.ifrs.len()));
        }
        if self.lambdas.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return bad(format!("rates must be finite and non-negative: {:?}", self.lambdas));
        }
        if self.ifrs.iter().any(|p| !(*p >= 0.0 && *p <= 1.0)) {
            return bad(format!("IFRs must lie in [0, 1]: {:?}", self.ifrs));
        }
        if !(self.psi > 0.0) {
            return bad(format!("dispersion must be positive, got {}", self.psi));
        }
        if !(self.c_init >= 0.0 && self.c_init.is_finite()) {
            return bad(format!("initial cases must be finite and non-negative, got {}", self.c_init));
        }
        if let Some(s) = self.sigma {
            if !(s > 0.0 && s.is_finite()) {
                return bad(format!("sigma must be positive, got {s}"));
            }
        }
        Ok(())
    }
}
