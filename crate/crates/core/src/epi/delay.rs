//! Discretised delay distributions.
//!
//! A continuous delay density `π(t)` is binned onto whole days with
//! `π_1 = ∫_0^{1.5} π` and `π_s = ∫_{s-0.5}^{s+0.5} π` for `s ≥ 2`.
//! Sums of two Gamma variables (infection→onset plus onset→death) have
//! no closed-form CDF, so their CDF is obtained by a deterministic
//! quadrature convolution on a fixed grid and cached per specification.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Gamma};

use super::EpiError;

/// Default quadrature grid step (days) for sum-of-Gamma convolutions.
pub const DEFAULT_GRID_STEP: f64 = 0.01;

/// Upper tail mass dropped when truncating a convolution grid.
const TAIL_MASS: f64 = 1e-8;

// 8-point Gauss-Legendre rule mapped to [0, 1]; symmetric, so node m and
// node 7 - m satisfy x_m + x_{7-m} = 1.
const GL_NODES: [f64; 8] = [
    0.019_855_071_751_231_856,
    0.101_666_761_293_186_63,
    0.237_233_795_041_835_5,
    0.408_282_678_752_175_1,
    0.591_717_321_247_824_9,
    0.762_766_204_958_164_5,
    0.898_333_238_706_813_4,
    0.980_144_928_248_768_1,
];
const GL_WEIGHTS: [f64; 8] = [
    0.050_614_268_145_188_13,
    0.111_190_517_226_687_24,
    0.156_853_322_938_943_64,
    0.181_341_891_689_180_99,
    0.181_341_891_689_180_99,
    0.156_853_322_938_943_64,
    0.111_190_517_226_687_24,
    0.050_614_268_145_188_13,
];

/// Which delay a pmf describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DelayKind {
    InfectionToDeath,
    SerialInterval,
    InfectionToRecovery,
}

/// Gamma distribution in shape/rate form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaDelay {
    pub shape: f64,
    pub rate: f64,
}

impl GammaDelay {
    pub fn new(shape: f64, rate: f64) -> Self {
        Self { shape, rate }
    }

    pub fn mean(&self) -> f64 {
        self.shape / self.rate
    }

    fn dist(&self) -> Result<Gamma, EpiError> {
        if !(self.shape > 0.0 && self.rate > 0.0 && self.shape.is_finite() && self.rate.is_finite()) {
            return Err(EpiError::InvalidDelay(format!(
                "Gamma shape and rate must be positive and finite, got shape={} rate={}",
                self.shape, self.rate
            )));
        }
        Gamma::new(self.shape, self.rate)
            .map_err(|e| EpiError::InvalidDelay(format!("Gamma({}, {}): {e}", self.shape, self.rate)))
    }
}

/// A delay that is either a single Gamma or the sum of two independent Gammas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelaySpec {
    pub components: Vec<GammaDelay>,
}

impl DelaySpec {
    pub fn gamma(shape: f64, rate: f64) -> Self {
        Self {
            components: vec![GammaDelay::new(shape, rate)],
        }
    }

    pub fn gamma_sum(a: GammaDelay, b: GammaDelay) -> Self {
        Self {
            components: vec![a, b],
        }
    }

    /// Infection→onset plus onset→death, Gamma(1.35, 0.27) + Gamma(4.94, 0.26).
    pub fn infection_to_death() -> Self {
        Self::gamma_sum(GammaDelay::new(1.35, 0.27), GammaDelay::new(4.94, 0.26))
    }

    /// Mean of the continuous delay.
    pub fn mean(&self) -> f64 {
        self.components.iter().map(GammaDelay::mean).sum()
    }
}

/// Daily probability masses `π_1, ..., π_{n-1}` of a discretised delay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayPmf {
    kind: DelayKind,
    /// `masses[s - 1]` holds `π_s`.
    masses: Vec<f64>,
}

impl DelayPmf {
    /// Builds a pmf from explicit masses (`masses[0]` is day 1).
    pub fn from_masses(kind: DelayKind, masses: Vec<f64>) -> Result<Self, EpiError> {
        if masses.iter().any(|m| !m.is_finite() || *m < 0.0) {
            return Err(EpiError::InvalidDelay("masses must be finite and non-negative".into()));
        }
        let total: f64 = masses.iter().sum();
        if total > 1.0 + 1e-12 {
            return Err(EpiError::InvalidDelay(format!("masses sum to {total} > 1")));
        }
        Ok(Self { kind, masses })
    }

    pub fn kind(&self) -> DelayKind {
        self.kind
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    /// `π_s`; zero for `s = 0` and beyond the horizon.
    #[inline]
    pub fn mass(&self, s: usize) -> f64 {
        if s == 0 {
            0.0
        } else {
            self.masses.get(s - 1).copied().unwrap_or(0.0)
        }
    }

    /// Largest day with a stored mass (`n - 1`).
    pub fn max_delay(&self) -> usize {
        self.masses.len()
    }

    pub fn total(&self) -> f64 {
        self.masses.iter().sum()
    }

    /// `Σ_s s·π_s` of the truncated pmf.
    pub fn mean(&self) -> f64 {
        self.masses
            .iter()
            .enumerate()
            .map(|(i, m)| (i + 1) as f64 * m)
            .sum()
    }
}

/// Discretises `spec` onto days `1..n-1` using the default grid step.
pub fn discretize_delay(spec: &DelaySpec, kind: DelayKind, n: usize) -> Result<DelayPmf, EpiError> {
    discretize_delay_with_step(spec, kind, n, DEFAULT_GRID_STEP)
}

/// As [`discretize_delay`], with an explicit convolution grid step.
///
/// `grid_step` must divide half a day exactly (0.01, 0.005, ...). It is
/// ignored for single-Gamma delays, whose CDF is exact.
pub fn discretize_delay_with_step(
    spec: &DelaySpec,
    kind: DelayKind,
    n: usize,
    grid_step: f64,
) -> Result<DelayPmf, EpiError> {
    if n < 3 {
        return Err(EpiError::InvalidDelay(format!("horizon n must be at least 3, got {n}")));
    }
    if let [single] = spec.components.as_slice() {
        let dist = single.dist()?;
        let masses = (1..n)
            .map(|s| {
                let lo = if s == 1 { 0.0 } else { dist.cdf(s as f64 - 0.5) };
                (dist.cdf(s as f64 + 0.5) - lo).max(0.0)
            })
            .collect();
        return Ok(DelayPmf { kind, masses });
    }
    let cdf = half_day_cdf(spec, grid_step)?;
    // cdf[k] = F(k / 2); beyond the cached range the tail is < TAIL_MASS.
    let at = |k: usize| -> f64 { cdf[k.min(cdf.len() - 1)] };
    let masses = (1..n)
        .map(|s| {
            let lo = if s == 1 { 0.0 } else { at(2 * s - 1) };
            (at(2 * s + 1) - lo).max(0.0)
        })
        .collect();
    Ok(DelayPmf { kind, masses })
}

#[derive(Clone, PartialEq, Eq, Hash)]
struct CacheKey {
    components: Vec<(u64, u64)>,
    step: u64,
}

type CdfCache = Mutex<HashMap<CacheKey, Arc<Vec<f64>>>>;

fn cdf_cache() -> &'static CdfCache {
    static CACHE: OnceLock<CdfCache> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Sum-of-two-Gammas CDF at every half day `0, 0.5, 1, ...` up to the truncation point.
fn half_day_cdf(spec: &DelaySpec, grid_step: f64) -> Result<Arc<Vec<f64>>, EpiError> {
    let dists = spec
        .components
        .iter()
        .map(GammaDelay::dist)
        .collect::<Result<Vec<_>, _>>()?;
    if dists.len() != 2 {
        return Err(EpiError::InvalidDelay(format!(
            "delay must be one Gamma or a sum of two, got {} components",
            dists.len()
        )));
    }
    let key = CacheKey {
        components: spec
            .components
            .iter()
            .map(|g| (g.shape.to_bits(), g.rate.to_bits()))
            .collect(),
        step: grid_step.to_bits(),
    };
    if let Some(hit) = cdf_cache().lock().expect("delay cache poisoned").get(&key) {
        return Ok(Arc::clone(hit));
    }

    let upper: f64 = dists.iter().map(|d| d.inverse_cdf(1.0 - TAIL_MASS / dists.len() as f64)).sum();
    let half_days = (2.0 * upper).ceil() as usize + 1;

    let values = {
        let panels_per_half = (0.5 / grid_step).round();
        if !(grid_step > 0.0) || (panels_per_half * grid_step - 0.5).abs() > 1e-12 {
            return Err(EpiError::InvalidDelay(format!(
                "grid step {grid_step} must divide 0.5 days"
            )));
        }
        // Integrate the smoother density against the other CDF.
        let (dens, cdf) = if spec.components[0].shape >= spec.components[1].shape {
            (&dists[0], &dists[1])
        } else {
            (&dists[1], &dists[0])
        };
        convolve_cdf(dens, cdf, grid_step, panels_per_half as usize, half_days)
    };

    let values = Arc::new(values);
    cdf_cache()
        .lock()
        .expect("delay cache poisoned")
        .entry(key)
        .or_insert_with(|| Arc::clone(&values));
    Ok(values)
}

/// `F(t) = ∫_0^t f(u) G(t - u) du` at `t = k/2`, `k = 0..=half_days`,
/// by composite Gauss-Legendre on panels of width `step`.
fn convolve_cdf(density: &Gamma, cdf: &Gamma, step: f64, panels_per_half: usize, half_days: usize) -> Vec<f64> {
    let total_panels = panels_per_half * half_days;
    let nodes = GL_NODES.len();
    let mut weighted_density = Vec::with_capacity(total_panels * nodes);
    let mut cdf_at_nodes = Vec::with_capacity(total_panels * nodes);
    for j in 0..total_panels {
        for m in 0..nodes {
            let u = (j as f64 + GL_NODES[m]) * step;
            weighted_density.push(step * GL_WEIGHTS[m] * density.pdf(u));
            cdf_at_nodes.push(cdf.cdf(u));
        }
    }

    let mut out = Vec::with_capacity(half_days + 1);
    out.push(0.0);
    for k in 1..=half_days {
        let panels = k * panels_per_half;
        let mut acc = 0.0;
        for j in 0..panels {
            // t - (j + x_m) h = (panels - 1 - j + x_{7-m}) h
            let mirror = (panels - 1 - j) * nodes;
            let base = j * nodes;
            for m in 0..nodes {
                acc += weighted_density[base + m] * cdf_at_nodes[mirror + nodes - 1 - m];
            }
        }
        out.push(acc.min(1.0));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn exponential_first_mass_closed_form() {
        let pmf = discretize_delay(&DelaySpec::gamma(1.0, 1.0), DelayKind::SerialInterval, 200).unwrap();
        assert_abs_diff_eq!(pmf.mass(1), 1.0 - (-1.5f64).exp(), epsilon = 1e-12);
        assert_abs_diff_eq!(pmf.mass(2), (-1.5f64).exp() - (-2.5f64).exp(), epsilon = 1e-12);
        assert_abs_diff_eq!(pmf.total(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn masses_are_subprobability_and_grow_with_horizon() {
        let spec = DelaySpec::infection_to_death();
        let mut last = 0.0;
        for n in [3, 10, 30, 60, 120, 400] {
            let pmf = discretize_delay(&spec, DelayKind::InfectionToDeath, n).unwrap();
            assert!(pmf.masses().iter().all(|m| *m >= 0.0));
            let total = pmf.total();
            assert!(total <= 1.0 + 1e-12);
            assert!(total >= last);
            last = total;
        }
        assert_abs_diff_eq!(last, 1.0, epsilon = 1e-7);
    }

    #[test]
    fn convolution_matches_exponential_sum() {
        // Exp(1) + Exp(1) is Gamma(2, 1): the convolution must reproduce it.
        let sum = DelaySpec::gamma_sum(GammaDelay::new(1.0, 1.0), GammaDelay::new(1.0, 1.0));
        let direct = DelaySpec::gamma(2.0, 1.0);
        let a = discretize_delay(&sum, DelayKind::SerialInterval, 60).unwrap();
        let b = discretize_delay(&direct, DelayKind::SerialInterval, 60).unwrap();
        for s in 1..60 {
            assert_abs_diff_eq!(a.mass(s), b.mass(s), epsilon = 1e-8);
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(discretize_delay(&DelaySpec::gamma(0.0, 1.0), DelayKind::SerialInterval, 10).is_err());
        assert!(discretize_delay(&DelaySpec::gamma(1.0, -2.0), DelayKind::SerialInterval, 10).is_err());
        assert!(discretize_delay(&DelaySpec::gamma(1.0, 1.0), DelayKind::SerialInterval, 2).is_err());
        let empty = DelaySpec { components: vec![] };
        assert!(discretize_delay(&empty, DelayKind::SerialInterval, 10).is_err());
    }

    #[test]
    fn mass_outside_support_is_zero() {
        let pmf = discretize_delay(&DelaySpec::gamma(2.0, 0.5), DelayKind::SerialInterval, 5).unwrap();
        assert_eq!(pmf.max_delay(), 4);
        assert_eq!(pmf.mass(0), 0.0);
        assert_eq!(pmf.mass(5), 0.0);
    }
}
