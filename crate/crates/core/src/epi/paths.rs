//! Forward map from parameters to the latent epidemic paths.

use serde::{Deserialize, Serialize};

use super::config::{ifr_at, lambda_clamped, ModelConfig, RecursionRanges};
use super::delay::DelayPmf;
use super::params::ParamVector;
use super::EpiError;

/// Deterministic trajectories over days `1..=n`; index `t - 1` holds day `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentPaths {
    /// Total (recorded plus unrecorded) daily cases `C_t`.
    pub cases: Vec<f64>,
    pub susceptible: Vec<f64>,
    /// Active infectives `I_t`.
    pub infectious: Vec<f64>,
    /// Removed `R_t^(s)`.
    pub removed: Vec<f64>,
    /// Expected daily deaths `θ_t` (zero on day 1).
    pub expected_deaths: Vec<f64>,
    /// IFR path `p_t`.
    pub ifr: Vec<f64>,
    /// Effective reproduction number `R_t = λ_t τ S_t / N`.
    pub reproduction: Vec<f64>,
}

impl LatentPaths {
    pub fn len(&self) -> usize {
        self.cases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cases.is_empty()
    }
}

/// Which state left its feasible region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StateKind {
    Cases,
    Susceptible,
    Infectious,
    Removed,
    ExpectedDeaths,
}

/// A parameter vector whose trajectory leaves the feasible region.
#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
#[error("infeasible trajectory: {state:?} = {value} on day {day}")]
pub struct Infeasible {
    pub day: usize,
    pub state: StateKind,
    pub value: f64,
}

/// A model variant bound to its delay distributions and vaccination series.
#[derive(Debug, Clone)]
pub struct EpiModel {
    pub config: ModelConfig,
    pub death_delay: DelayPmf,
    /// Infection→recovery pmf `π*`, required when the SEIRS flag is on.
    pub recovery_delay: Option<DelayPmf>,
    /// First doses per day `ρ_t`, length `n` (zeros when unused).
    pub vaccinations: Vec<f64>,
}

impl EpiModel {
    pub fn new(
        config: ModelConfig,
        death_delay: DelayPmf,
        recovery_delay: Option<DelayPmf>,
        vaccinations: Vec<f64>,
    ) -> Result<Self, EpiError> {
        config.validate()?;
        if vaccinations.len() != config.n {
            return Err(EpiError::InvalidConfig(format!(
                "vaccination series has {} days, expected {}",
                vaccinations.len(),
                config.n
            )));
        }
        if vaccinations.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return Err(EpiError::InvalidConfig("vaccinations must be non-negative".into()));
        }
        if config.flags.seirs && recovery_delay.is_none() {
            return Err(EpiError::InvalidConfig(
                "the SEIRS variant needs an infection-to-recovery delay".into(),
            ));
        }
        Ok(Self {
            config,
            death_delay,
            recovery_delay,
            vaccinations,
        })
    }

    pub fn simulate(&self, params: &ParamVector) -> Result<LatentPaths, Infeasible> {
        simulate_paths(params, self)
    }
}

/// `V_t = a1 ρ_{t-14} 1{t ∈ [15, n-h-2]} + a2 ρ_{t-35} 1{t ∈ [36, n-h-2]}`.
///
/// `rho[t - 1]` is the number of first doses on day `t`.
pub fn vaccination_term(rho: &[f64], t: usize, a1: f64, a2: f64, n: usize, h: usize) -> f64 {
    let upper = (n + 1).saturating_sub(h + 3);
    let mut v = 0.0;
    if (15..=upper).contains(&t) {
        v += a1 * rho[t - 15];
    }
    if (36..=upper).contains(&t) {
        v += a2 * rho[t - 36];
    }
    v
}

/// Survivors losing immunity: `r_t = (1 - p_t) Σ_{k<t} π*_{t-k} C_k`.
///
/// `cases[k - 1]` is `C_k` and `ifr[t - 1]` is `p_t`; only `C_1..C_{t-1}` are read.
pub fn seirs_reentry(cases: &[f64], ifr: &[f64], recovery: &DelayPmf, t: usize) -> f64 {
    if t < 2 {
        return 0.0;
    }
    let lo = t.saturating_sub(recovery.max_delay()).max(1);
    let conv: f64 = (lo..t).map(|k| recovery.mass(t - k) * cases[k - 1]).sum();
    (1.0 - ifr[t - 1]) * conv
}

/// Daily `λ_t` over days `1..=n`, clamped to the end segments outside the rate range.
pub fn lambda_series(params: &ParamVector, config: &ModelConfig) -> Vec<f64> {
    (1..=config.n)
        .map(|t| lambda_clamped(t, &params.lambdas, &config.changepoints))
        .collect()
}

/// `R_t = λ_t τ S_t / N`, with `λ_t` clamped to the end segments outside the rate range.
pub fn reproduction_series(susceptible: &[f64], params: &ParamVector, config: &ModelConfig) -> Vec<f64> {
    let scale = config.tau() as f64 / config.population;
    susceptible
        .iter()
        .enumerate()
        .map(|(i, s)| lambda_clamped(i + 1, &params.lambdas, &config.changepoints) * scale * s)
        .collect()
}

/// Runs the discrete-time recursions for one parameter vector.
///
/// The first `τ + h` days of `C_t` equal `c_init`; afterwards
/// `C_t = λ_{t-1-h} S_{t-1-h} I_{t-1-h} / N`. `S`, `I`, `R` follow the
/// flag-dependent updates on their range and are carried forward elsewhere.
/// Any negative or non-finite state, or `S_t > N`, yields [`Infeasible`].
pub fn simulate_paths(params: &ParamVector, model: &EpiModel) -> Result<LatentPaths, Infeasible> {
    let cfg = &model.config;
    let n = cfg.n;
    let tau = cfg.tau();
    let h = cfg.h();
    let pop = cfg.population;
    let births = if cfg.flags.demography { cfg.births_per_day } else { 0.0 };
    let ranges = cfg.ranges();

    // 1-based working arrays; slot 0 unused.
    let mut c = vec![0.0; n + 1];
    let mut s = vec![0.0; n + 1];
    let mut i = vec![0.0; n + 1];
    let mut r = vec![0.0; n + 1];
    let ifr: Vec<f64> = (1..=n).map(|t| ifr_at(t, &params.ifrs, &cfg.ifr_breaks)).collect();

    for t in ranges.seed.0..=ranges.seed.1 {
        c[t] = params.c_init;
    }
    s[1] = pop - c[1];
    i[1] = c[1];
    check(1, &c, &s, &i, &r, pop)?;

    // cumulative[t] = Σ_{k ≤ t} C_k
    let mut cumulative = vec![0.0; n + 1];
    cumulative[1] = c[1];
    for t in 2..=n {
        if RecursionRanges::contains(ranges.cases, t) {
            let src = t - 1 - h;
            let rate = lambda_clamped(src, &params.lambdas, &cfg.changepoints);
            c[t] = rate * s[src] * i[src] / pop;
        } else if t > ranges.seed.1 {
            c[t] = c[t - 1];
        }
        cumulative[t] = cumulative[t - 1] + c[t];

        if RecursionRanges::contains(ranges.states, t) {
            let vacc = if cfg.flags.vaccination {
                vaccination_term(&model.vaccinations, t, cfg.immunity_first, cfg.immunity_second, n, h)
            } else {
                0.0
            };
            let reentry = match (&model.recovery_delay, cfg.flags.seirs) {
                (Some(pmf), true) if t > cfg.waning_delay => {
                    seirs_reentry(&c[1..], &ifr, pmf, t - cfg.waning_delay)
                }
                _ => 0.0,
            };
            let active: f64 = c[t + 1 - tau..=t].iter().sum();
            s[t] = s[t - 1] - c[t] - vacc + births * (1.0 - s[t - 1] / pop) + reentry;
            i[t] = active - births * i[t - 1] / pop;
            r[t] = cumulative[t - tau] + vacc - births * r[t - 1] / pop;
        } else {
            s[t] = s[t - 1];
            i[t] = i[t - 1];
            r[t] = r[t - 1];
        }
        check(t, &c, &s, &i, &r, pop)?;
    }

    let mut theta = vec![0.0; n];
    let pmf = &model.death_delay;
    for t in ranges.deaths.0..=ranges.deaths.1 {
        let lo = t.saturating_sub(pmf.max_delay()).max(1);
        // masses[t - k - 1] pairs with c[k] for k = lo..t
        let conv: f64 = pmf.masses()[..t - lo]
            .iter()
            .rev()
            .zip(&c[lo..t])
            .map(|(m, ck)| m * ck)
            .sum();
        let value = ifr[t - 1] * conv;
        if !value.is_finite() || value < 0.0 {
            return Err(Infeasible {
                day: t,
                state: StateKind::ExpectedDeaths,
                value,
            });
        }
        theta[t - 1] = value;
    }

    let susceptible = s[1..].to_vec();
    let reproduction = reproduction_series(&susceptible, params, cfg);
    Ok(LatentPaths {
        cases: c[1..].to_vec(),
        susceptible,
        infectious: i[1..].to_vec(),
        removed: r[1..].to_vec(),
        expected_deaths: theta,
        ifr,
        reproduction,
    })
}

fn check(t: usize, c: &[f64], s: &[f64], i: &[f64], r: &[f64], pop: f64) -> Result<(), Infeasible> {
    let fail = |state, value| {
        Err(Infeasible {
            day: t,
            state,
            value,
        })
    };
    if !(c[t] >= 0.0 && c[t].is_finite()) {
        return fail(StateKind::Cases, c[t]);
    }
    if !(s[t] >= 0.0 && s[t] <= pop * (1.0 + 1e-12)) {
        return fail(StateKind::Susceptible, s[t]);
    }
    if !(i[t] >= 0.0 && i[t].is_finite()) {
        return fail(StateKind::Infectious, i[t]);
    }
    if !(r[t] >= 0.0 && r[t].is_finite()) {
        return fail(StateKind::Removed, r[t]);
    }
    Ok(())
}
