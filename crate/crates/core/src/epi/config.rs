use serde::{Deserialize, Serialize};

use super::EpiError;

/// Observation model for daily deaths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Likelihood {
    /// Negative Binomial with mean θ_t and dispersion ψ.
    #[default]
    #[serde(alias = "negbin")]
    NegativeBinomial,
    /// Poisson with an exponentially distributed rate (NB with ψ = 1).
    #[serde(alias = "poisexp")]
    PoissonExponential,
    /// Poisson with a log-normally distributed rate.
    #[serde(alias = "poislognorm")]
    PoissonLogNormal,
}

impl Likelihood {
    pub fn short_name(self) -> &'static str {
        match self {
            Likelihood::NegativeBinomial => "negbin",
            Likelihood::PoissonExponential => "poisexp",
            Likelihood::PoissonLogNormal => "poislognorm",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "negbin" | "negative_binomial" => Some(Likelihood::NegativeBinomial),
            "poisexp" | "poisson_exponential" => Some(Likelihood::PoissonExponential),
            "poislognorm" | "poisson_lognormal" => Some(Likelihood::PoissonLogNormal),
            _ => None,
        }
    }
}

/// Structural switches of the transmission model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub struct ModelFlags {
    /// Use the exposed period `h`; when off the model is SIR-type (`h = 0`).
    pub exposed: bool,
    pub vaccination: bool,
    pub demography: bool,
    /// Waning immunity: survivors re-enter `S` after `t*` days.
    pub seirs: bool,
}

impl ModelFlags {
    /// Parses `sir`, `seir`, optionally followed by `.vacc`, `.dem`, `.seirs`.
    pub fn parse(label: &str) -> Option<Self> {
        let mut parts = label.split('.');
        let mut flags = match parts.next()? {
            "sir" => ModelFlags::default(),
            "seir" => ModelFlags {
                exposed: true,
                ..ModelFlags::default()
            },
            _ => return None,
        };
        for part in parts {
            let slot = match part {
                "vacc" => &mut flags.vaccination,
                "dem" => &mut flags.demography,
                "seirs" => &mut flags.seirs,
                _ => return None,
            };
            if *slot {
                return None;
            }
            *slot = true;
        }
        Some(flags)
    }

    pub fn label(&self) -> String {
        let mut s = String::from(if self.exposed { "seir" } else { "sir" });
        if self.vaccination {
            s.push_str(".vacc");
        }
        if self.demography {
            s.push_str(".dem");
        }
        if self.seirs {
            s.push_str(".seirs");
        }
        s
    }

    /// The eight SIR/SEIR variants with zero to two of vaccination and demography.
    pub fn table_variants() -> Vec<ModelFlags> {
        let mut out = Vec::with_capacity(8);
        for exposed in [false, true] {
            for (vaccination, demography) in [(false, false), (true, false), (false, true), (true, true)] {
                out.push(ModelFlags {
                    exposed,
                    vaccination,
                    demography,
                    seirs: false,
                });
            }
        }
        out
    }
}

/// Constants and grids of one model variant fitted to `n` days of data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Number of days in the series.
    pub n: usize,
    /// Population size `N`.
    pub population: f64,
    /// Infectious period `τ` (days).
    pub infectious_period: usize,
    /// Exposed period `h` (days); only used when `flags.exposed` is set.
    pub exposed_period: usize,
    /// Waning delay `t*` (days) for the SEIRS re-entry.
    pub waning_delay: usize,
    /// Probability of immunity two weeks after the first dose.
    pub immunity_first: f64,
    /// Additional immunity probability five weeks after the first dose.
    pub immunity_second: f64,
    /// Daily births `A` (persons/day).
    pub births_per_day: f64,
    /// Change-points `u_0 = 1 < u_1 < ... < u_J = n - h - 1`.
    pub changepoints: Vec<usize>,
    /// IFR break-points `l_1 < ... < l_{B+1}`.
    pub ifr_breaks: Vec<usize>,
    pub flags: ModelFlags,
    pub likelihood: Likelihood,
}

impl ModelConfig {
    /// A single-segment SEIR configuration with τ = 6, h = 2 and one IFR segment.
    pub fn new(n: usize, population: f64) -> Self {
        let flags = ModelFlags {
            exposed: true,
            ..ModelFlags::default()
        };
        let mut cfg = Self {
            n,
            population,
            infectious_period: 6,
            exposed_period: 2,
            waning_delay: 84,
            immunity_first: 0.4,
            immunity_second: 0.1,
            births_per_day: 0.0,
            changepoints: Vec::new(),
            ifr_breaks: vec![1, n + 1],
            flags,
            likelihood: Likelihood::NegativeBinomial,
        };
        cfg.changepoints = vec![1, cfg.last_changepoint()];
        cfg
    }

    /// Effective exposed period: `h` when the exposed flag is on, else 0.
    pub fn h(&self) -> usize {
        if self.flags.exposed {
            self.exposed_period
        } else {
            0
        }
    }

    pub fn tau(&self) -> usize {
        self.infectious_period
    }

    /// `u_J = n - h - 1`.
    pub fn last_changepoint(&self) -> usize {
        (self.n + 1).saturating_sub(self.h() + 2)
    }

    /// Number of infection-rate segments `J`.
    pub fn n_segments(&self) -> usize {
        self.changepoints.len().saturating_sub(1)
    }

    /// Number of IFR segments `B`.
    pub fn n_ifr_segments(&self) -> usize {
        self.ifr_breaks.len().saturating_sub(1)
    }

    /// Replaces the interior change-points, keeping `u_0 = 1` and `u_J = n - h - 1`.
    pub fn with_interior_changepoints(mut self, interior: &[usize]) -> Self {
        let mut cps = vec![1];
        cps.extend_from_slice(interior);
        cps.push(self.last_changepoint());
        self.changepoints = cps;
        self
    }

    pub fn ranges(&self) -> RecursionRanges {
        RecursionRanges::new(self.n, self.tau(), self.h())
    }

    pub fn validate(&self) -> Result<(), EpiError> {
        let bad = |msg: String| Err(EpiError::InvalidConfig(msg));
        if self.n < 3 {
            return bad(format!("series length n = {} is too short", self.n));
        }
        if !(self.population > 0.0 && self.population.is_finite()) {
            return bad(format!("population must be positive, got {}", self.population));
        }
        if self.infectious_period < 1 {
            return bad("infectious period must be at least one day".into());
        }
        for (name, a) in [("immunity_first", self.immunity_first), ("immunity_second", self.immunity_second)] {
            if !(0.0..=1.0).contains(&a) {
                return bad(format!("{name} must lie in [0, 1], got {a}"));
            }
        }
        if self.immunity_first + self.immunity_second > 1.0 {
            return bad("immunity_first + immunity_second exceeds 1".into());
        }
        if !(self.births_per_day >= 0.0 && self.births_per_day.is_finite()) {
            return bad(format!("births per day must be non-negative, got {}", self.births_per_day));
        }
        let cps = &self.changepoints;
        if cps.len() < 2 {
            return bad("need at least two change-points (u_0 and u_J)".into());
        }
        if cps[0] != 1 {
            return bad(format!("first change-point must be 1, got {}", cps[0]));
        }
        if *cps.last().unwrap() != self.last_changepoint() {
            return bad(format!(
                "last change-point must be n - h - 1 = {}, got {}",
                self.last_changepoint(),
                cps.last().unwrap()
            ));
        }
        if cps.windows(2).any(|w| w[0] >= w[1]) {
            return bad(format!("change-points must be strictly increasing: {cps:?}"));
        }
        let breaks = &self.ifr_breaks;
        if breaks.len() < 2 {
            return bad("need at least two IFR break-points".into());
        }
        if breaks[0] < 1 || breaks.windows(2).any(|w| w[0] >= w[1]) {
            return bad(format!("IFR break-points must be strictly increasing from day 1: {breaks:?}"));
        }
        Ok(())
    }
}

/// Inclusive 1-based day ranges over which each recursion applies.
///
/// Outside its range a state is carried forward from the previous day.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RecursionRanges {
    /// Days on which `C_t = C_init`: `1..=τ+h`.
    pub seed: (usize, usize),
    /// Days on which `C_t` follows the transmission recursion: `τ+h+1..=n-1`.
    pub cases: (usize, usize),
    /// Days on which `S`, `I`, `R` are updated: `max(τ, 2)..=n-h-2`.
    pub states: (usize, usize),
    /// Days with a modelled death mean: `2..=n`.
    pub deaths: (usize, usize),
    /// Days with a defined infection rate: `1..=n-h-2`.
    pub rate: (usize, usize),
}

impl RecursionRanges {
    pub fn new(n: usize, tau: usize, h: usize) -> Self {
        let upper = (n + 1).saturating_sub(h + 3);
        Self {
            seed: (1, (tau + h).min(n)),
            cases: (tau + h + 1, n - 1),
            states: (tau.max(2), upper),
            deaths: (2, n),
            rate: (1, upper),
        }
    }

    #[inline]
    pub fn contains(range: (usize, usize), t: usize) -> bool {
        range.0 <= t && t <= range.1
    }
}

/// Piecewise-constant infection rate: `λ_(j+1)` for `t ∈ [u_j, u_{j+1} - 1]`.
pub fn lambda_at(t: usize, lambdas: &[f64], changepoints: &[usize]) -> Result<f64, EpiError> {
    let (first, last) = match (changepoints.first(), changepoints.last()) {
        (Some(&f), Some(&l)) if changepoints.len() == lambdas.len() + 1 => (f, l),
        _ => {
            return Err(EpiError::InvalidConfig(format!(
                "{} change-points for {} rates",
                changepoints.len(),
                lambdas.len()
            )))
        }
    };
    if t < first || t + 1 > last {
        return Err(EpiError::OutOfRange {
            t,
            lo: first,
            hi: last.saturating_sub(1),
        });
    }
    let j = changepoints.partition_point(|&u| u <= t) - 1;
    Ok(lambdas[j])
}

/// Rate on day `t`, clamped to the first/last segment outside `[u_0, u_J - 1]`.
pub(crate) fn lambda_clamped(t: usize, lambdas: &[f64], changepoints: &[usize]) -> f64 {
    let j = changepoints.partition_point(|&u| u <= t);
    lambdas[j.saturating_sub(1).min(lambdas.len() - 1)]
}

/// Piecewise-constant IFR on the break grid; clamped to the end segments.
pub fn ifr_at(t: usize, ifrs: &[f64], breaks: &[usize]) -> f64 {
    let j = breaks.partition_point(|&l| l <= t);
    ifrs[j.saturating_sub(1).min(ifrs.len() - 1)]
}

/// Daily births `A = A_1 / (365 g_1)` from the size of the youngest age band.
pub fn births_per_day(youngest_group: f64, group_years: f64) -> Result<f64, EpiError> {
    if !(youngest_group >= 0.0) || !(group_years > 0.0) {
        return Err(EpiError::InvalidConfig(format!(
            "births need A1 >= 0 and g1 > 0, got A1={youngest_group}, g1={group_years}"
        )));
    }
    Ok(youngest_group / (365.0 * group_years))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn lambda_lookup_follows_intervals() {
        let u = [1, 10, 20];
        let l = [2.0, 3.0];
        assert_eq!(lambda_at(1, &l, &u).unwrap(), 2.0);
        assert_eq!(lambda_at(9, &l, &u).unwrap(), 2.0);
        assert_eq!(lambda_at(10, &l, &u).unwrap(), 3.0);
        assert_eq!(lambda_at(19, &l, &u).unwrap(), 3.0);
        assert!(matches!(lambda_at(20, &l, &u), Err(EpiError::OutOfRange { t: 20, .. })));
        assert!(lambda_at(0, &l, &u).is_err());
    }

    #[test]
    fn single_segment_rate_everywhere() {
        let u = [1, 40];
        for t in 1..40 {
            assert_eq!(lambda_at(t, &[0.7], &u).unwrap(), 0.7);
        }
    }

    #[test]
    fn births_examples() {
        assert_eq!(births_per_day(365.0, 1.0).unwrap(), 1.0);
        assert_abs_diff_eq!(births_per_day(1_049_839.0, 10.0).unwrap(), 287.627, epsilon = 1e-3);
        assert_abs_diff_eq!(births_per_day(0.062 * 67_886_011.0, 5.0).unwrap(), 2306.2, epsilon = 0.1);
        assert!(births_per_day(10.0, 0.0).is_err());
        assert!(births_per_day(-1.0, 1.0).is_err());
    }

    #[test]
    fn model_labels_round_trip() {
        for flags in ModelFlags::table_variants() {
            assert_eq!(ModelFlags::parse(&flags.label()), Some(flags));
        }
        assert_eq!(ModelFlags::parse("seir.vacc.dem.seirs").unwrap().label(), "seir.vacc.dem.seirs");
        assert!(ModelFlags::parse("sir.vacc.vacc").is_none());
        assert!(ModelFlags::parse("sird").is_none());
    }

    #[test]
    fn default_config_is_valid() {
        let cfg = ModelConfig::new(100, 1e6).with_interior_changepoints(&[30, 60]);
        cfg.validate().unwrap();
        assert_eq!(cfg.changepoints, vec![1, 30, 60, 97]);
        assert_eq!(cfg.n_segments(), 3);
    }

    #[test]
    fn validation_catches_bad_grids() {
        let mut cfg = ModelConfig::new(100, 1e6);
        cfg.changepoints = vec![1, 50, 50, 97];
        assert!(cfg.validate().is_err());
        let mut cfg = ModelConfig::new(100, 1e6);
        cfg.changepoints = vec![1, 96];
        assert!(cfg.validate().is_err());
        let mut cfg = ModelConfig::new(100, 1e6);
        cfg.immunity_first = 0.7;
        cfg.immunity_second = 0.4;
        assert!(cfg.validate().is_err());
        let mut cfg = ModelConfig::new(100, 1e6);
        cfg.ifr_breaks = vec![1];
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn ifr_path_is_piecewise() {
        let b = [1, 5, 11];
        let p = [0.01, 0.02];
        assert_eq!(ifr_at(1, &p, &b), 0.01);
        assert_eq!(ifr_at(4, &p, &b), 0.01);
        assert_eq!(ifr_at(5, &p, &b), 0.02);
        assert_eq!(ifr_at(10, &p, &b), 0.02);
        assert_eq!(ifr_at(30, &p, &b), 0.02);
    }
}
