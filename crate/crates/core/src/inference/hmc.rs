use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::rngs::ChaCha8Rng;
use rand::{RngExt, SeedableRng};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::LogDensity;

/// Energy error above which a trajectory counts as divergent.
pub const DIVERGENCE_THRESHOLD: f64 = 1000.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    pub warmup: usize,
    pub samples: usize,
    /// Keep every `thin`-th post-warmup draw.
    pub thin: usize,
    pub target_accept: f64,
    /// Integration time `ε·L` before jitter, in units of the adapted metric.
    pub path_length: f64,
    pub max_leapfrog: usize,
    pub min_step: f64,
    pub max_step: f64,
    /// Sd of the N(0, sd) jitter around the starting point.
    pub init_jitter: f64,
    pub adapt_mass: bool,
    pub metric: MetricKind,
    /// Climb to a posterior mode before warmup; see [`super::find_mode`].
    pub optimize_init: bool,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    #[default]
    Diagonal,
    Dense,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            warmup: 1000,
            samples: 1000,
            thin: 1,
            target_accept: 0.8,
            path_length: 1.6,
            max_leapfrog: 256,
            min_step: 1e-8,
            max_step: 10.0,
            init_jitter: 0.1,
            adapt_mass: true,
            metric: MetricKind::Diagonal,
            optimize_init: false,
            seed: 1,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<(), SamplerError> {
        let bad = |m: &str| Err(SamplerError::InvalidConfig(m.into()));
        if self.samples == 0 || self.thin == 0 {
            return bad("sampling iterations and thinning must be positive");
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return bad("target acceptance must lie in (0, 1)");
        }
        if !(self.path_length > 0.0) || self.max_leapfrog == 0 {
            return bad("path length and leapfrog bound must be positive");
        }
        if !(self.min_step > 0.0 && self.min_step < self.max_step) {
            return bad("step bounds must satisfy 0 < min_step < max_step");
        }
        if !(self.init_jitter >= 0.0) {
            return bad("initial jitter must be non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SamplerError {
    #[error("invalid sampler configuration: {0}")]
    InvalidConfig(String),
    #[error("chain {chain}: no finite starting point in {attempts} attempts")]
    Initialization { chain: usize, attempts: usize },
    #[error("chain {chain}: every warmup iteration diverged")]
    AllDivergent { chain: usize },
    #[error("chain {chain}: mode search failed: {message}")]
    ModeSearch { chain: usize, message: String },
    #[error("chain {chain} panicked")]
    Panicked { chain: usize },
}

/// Per-chain adaptation and acceptance record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainMeta {
    pub chain: usize,
    pub seed: u64,
    /// ChaCha stream of this chain: `chain + 1` under the master seed.
    pub stream: u64,
    pub step_size: f64,
    /// Diagonal of the adapted inverse metric.
    pub inv_metric: Vec<f64>,
    pub accept_rate: f64,
    pub warmup_accept_rate: f64,
    pub divergences: usize,
    pub warmup_divergences: usize,
    pub leapfrog_steps: u64,
    pub wall_time_secs: f64,
}

/// Retained draws of one chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainDraws {
    pub names: Vec<String>,
    /// `draws[m]` is the m-th unconstrained draw.
    pub draws: Vec<Vec<f64>>,
    pub constrained: Vec<Vec<f64>>,
    pub lp: Vec<f64>,
    /// Per-observation log likelihood, when the target provides it.
    pub loglik: Option<Vec<Vec<f64>>>,
    pub log_prior: Option<Vec<f64>>,
    pub accept_stat: Vec<f64>,
    pub divergent: Vec<bool>,
    pub meta: ChainMeta,
}

impl ChainDraws {
    /// Wraps externally generated draws, filling the target-derived columns.
    pub fn from_target<T: LogDensity + ?Sized>(target: &T, draws: Vec<Vec<f64>>, chain: usize) -> Self {
        let m = draws.len();
        Self {
            names: target.param_names(),
            constrained: draws.iter().map(|x| target.constrain(x)).collect(),
            lp: draws.iter().map(|x| target.log_density(x)).collect(),
            loglik: draws.iter().map(|x| target.pointwise_loglik(x)).collect(),
            log_prior: draws.iter().map(|x| target.log_prior(x)).collect(),
            accept_stat: vec![1.0; m],
            divergent: vec![false; m],
            draws,
            meta: ChainMeta {
                chain,
                seed: 0,
                stream: 0,
                step_size: f64::NAN,
                inv_metric: Vec::new(),
                accept_rate: 1.0,
                warmup_accept_rate: f64::NAN,
                divergences: 0,
                warmup_divergences: 0,
                leapfrog_steps: 0,
                wall_time_secs: 0.0,
            },
        }
    }

    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn column(&self, p: usize) -> Vec<f64> {
        self.draws.iter().map(|d| d[p]).collect()
    }

    pub fn constrained_column(&self, p: usize) -> Vec<f64> {
        self.constrained.iter().map(|d| d[p]).collect()
    }

    /// 64-bit FNV-1a digest of the unconstrained draw matrix bits.
    pub fn digest(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for v in self.draws.iter().flatten().chain(&self.lp) {
            for b in v.to_bits().to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        }
        h
    }
}

/// Stacks chains into one pooled draw list.
pub fn pooled<'a>(chains: &'a [ChainDraws]) -> impl Iterator<Item = &'a [f64]> + 'a {
    chains.iter().flat_map(|c| c.draws.iter().map(Vec::as_slice))
}

/// Dual averaging of the log step size towards a target acceptance.
#[derive(Debug, Clone)]
pub struct DualAveraging {
    mu: f64,
    target: f64,
    h_bar: f64,
    log_eps: f64,
    log_eps_bar: f64,
    count: f64,
}

impl DualAveraging {
    const GAMMA: f64 = 0.1;
    const T0: f64 = 10.0;
    const KAPPA: f64 = 0.75;

    pub fn new(step: f64, target: f64) -> Self {
        Self {
            mu: (10.0 * step).ln(),
            target,
            h_bar: 0.0,
            log_eps: step.ln(),
            log_eps_bar: 0.0,
            count: 0.0,
        }
    }

    /// Feeds one acceptance statistic; returns the next step size.
    pub fn update(&mut self, accept: f64) -> f64 {
        self.count += 1.0;
        let w = 1.0 / (self.count + Self::T0);
        self.h_bar = (1.0 - w) * self.h_bar + w * (self.target - accept);
        self.log_eps = self.mu - self.count.sqrt() / Self::GAMMA * self.h_bar;
        let eta = self.count.powf(-Self::KAPPA);
        self.log_eps_bar = eta * self.log_eps + (1.0 - eta) * self.log_eps_bar;
        self.log_eps.exp()
    }

    /// Averaged step size to use once adaptation stops.
    pub fn final_step(&self) -> f64 {
        self.log_eps_bar.exp()
    }
}

/// Warmup schedule: fast initial buffer, doubling slow windows that estimate
/// the metric, and a fast terminal buffer.
pub fn adaptation_windows(warmup: usize) -> (usize, Vec<usize>) {
    let (init, term, base) = if warmup >= 150 {
        (75, 50, 25)
    } else {
        let init = (0.15 * warmup as f64) as usize;
        let term = (0.1 * warmup as f64) as usize;
        (init, term, warmup.saturating_sub(init + term))
    };
    let mut ends = Vec::new();
    if base == 0 {
        return (init, ends);
    }
    let last = warmup - term;
    let mut start = init;
    let mut size = base;
    while start < last {
        let mut end = start + size;
        if end + 2 * size > last {
            end = last;
        }
        ends.push(end);
        start = end;
        size *= 2;
    }
    (init, ends)
}

/// Inverse mass matrix `Σ`: momentum `p ~ N(0, Σ⁻¹)`, velocity `Σ p`.
#[derive(Debug, Clone)]
enum Metric {
    Diagonal(Vec<f64>),
    Dense { sigma: DMatrix<f64>, chol: DMatrix<f64> },
}

impl Metric {
    fn unit(d: usize) -> Self {
        Metric::Diagonal(vec![1.0; d])
    }

    fn dense(sigma: DMatrix<f64>) -> Option<Self> {
        let chol = sigma.clone().cholesky()?.l();
        Some(Metric::Dense { sigma, chol })
    }

    fn velocity(&self, p: &[f64]) -> Vec<f64> {
        match self {
            Metric::Diagonal(m) => p.iter().zip(m).map(|(p, m)| p * m).collect(),
            Metric::Dense { sigma, .. } => (sigma * DVector::from_column_slice(p)).iter().copied().collect(),
        }
    }

    fn kinetic(&self, p: &[f64]) -> f64 {
        0.5 * p.iter().zip(self.velocity(p)).map(|(p, v)| p * v).sum::<f64>()
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        match self {
            Metric::Diagonal(m) => m
                .iter()
                .map(|m| rng.sample::<f64, _>(StandardNormal) / m.sqrt())
                .collect(),
            Metric::Dense { chol, .. } => {
                let z = DVector::from_fn(chol.nrows(), |_, _| rng.sample::<f64, _>(StandardNormal));
                let p = chol.transpose().solve_upper_triangular(&z).expect("non-singular factor");
                p.iter().copied().collect()
            }
        }
    }

    fn diagonal(&self) -> Vec<f64> {
        match self {
            Metric::Diagonal(m) => m.clone(),
            Metric::Dense { sigma, .. } => sigma.diagonal().iter().copied().collect(),
        }
    }
}

struct State {
    x: Vec<f64>,
    lp: f64,
    grad: Vec<f64>,
}

fn evaluate<T: LogDensity + ?Sized>(target: &T, x: Vec<f64>) -> Option<State> {
    let lp = target.log_density(&x);
    if !lp.is_finite() {
        return None;
    }
    let mut grad = vec![0.0; x.len()];
    target.gradient(&x, &mut grad).ok()?;
    grad.iter().all(|g| g.is_finite()).then_some(State { x, lp, grad })
}

struct Transition {
    accept: f64,
    divergent: bool,
    steps: usize,
}

/// Runs `steps` leapfrog steps from `state`; `None` means the trajectory
/// left the region where the target and its gradient are finite.
fn leapfrog<T: LogDensity + ?Sized>(
    target: &T,
    state: &State,
    p0: &[f64],
    eps: f64,
    steps: usize,
    metric: &Metric,
) -> Option<(State, Vec<f64>)> {
    let mut x = state.x.clone();
    let mut g = state.grad.clone();
    let mut p = p0.to_vec();
    let mut lp = state.lp;
    for _ in 0..steps {
        for i in 0..x.len() {
            p[i] += 0.5 * eps * g[i];
        }
        for (xi, vi) in x.iter_mut().zip(metric.velocity(&p)) {
            *xi += eps * vi;
        }
        let next = evaluate(target, x)?;
        x = next.x;
        g = next.grad;
        lp = next.lp;
        for i in 0..x.len() {
            p[i] += 0.5 * eps * g[i];
        }
    }
    Some((State { x, lp, grad: g }, p))
}

/// Energy change `H(x', p') - H(x, p)` of a leapfrog trajectory under a
/// unit metric; used for integrator checks.
pub fn energy_error<T: LogDensity + ?Sized>(target: &T, x: &[f64], p: &[f64], eps: f64, steps: usize) -> f64 {
    let metric = Metric::unit(x.len());
    let Some(start) = evaluate(target, x.to_vec()) else {
        return f64::NAN;
    };
    match leapfrog(target, &start, p, eps, steps, &metric) {
        Some((end, p1)) => (metric.kinetic(&p1) - end.lp) - (metric.kinetic(p) - start.lp),
        None => f64::INFINITY,
    }
}

fn transition<T: LogDensity + ?Sized>(
    target: &T,
    state: &mut State,
    rng: &mut ChaCha8Rng,
    eps: f64,
    metric: &Metric,
    cfg: &SamplerConfig,
) -> Transition {
    let p0 = metric.draw(rng);
    let u: f64 = rng.random_range(0.5..1.5);
    let steps = ((u * cfg.path_length / eps).ceil() as usize).clamp(1, cfg.max_leapfrog);
    let h0 = metric.kinetic(&p0) - state.lp;
    let proposal = leapfrog(target, state, &p0, eps, steps, metric);
    let Some((next, p1)) = proposal else {
        return Transition {
            accept: 0.0,
            divergent: true,
            steps,
        };
    };
    let h1 = metric.kinetic(&p1) - next.lp;
    let delta = h1 - h0;
    if !delta.is_finite() || delta > DIVERGENCE_THRESHOLD {
        return Transition {
            accept: 0.0,
            divergent: true,
            steps,
        };
    }
    let accept = (-delta).exp().min(1.0);
    if rng.random::<f64>() < accept {
        *state = next;
    }
    Transition {
        accept,
        divergent: false,
        steps,
    }
}

fn initial_step<T: LogDensity + ?Sized>(target: &T, state: &State, rng: &mut ChaCha8Rng, metric: &Metric) -> f64 {
    let mut eps = 1.0;
    let log_accept = |eps: f64, rng: &mut ChaCha8Rng| {
        let p = metric.draw(rng);
        let h0 = metric.kinetic(&p) - state.lp;
        match leapfrog(target, state, &p, eps, 1, metric) {
            Some((s, p1)) => {
                let v = h0 - (metric.kinetic(&p1) - s.lp);
                if v.is_nan() {
                    f64::NEG_INFINITY
                } else {
                    v
                }
            }
            None => f64::NEG_INFINITY,
        }
    };
    let up = log_accept(eps, rng) > 0.5f64.ln();
    for _ in 0..60 {
        let la = log_accept(eps, rng);
        if up && la <= 0.5f64.ln() {
            return eps * 0.5;
        }
        if !up && la > 0.5f64.ln() {
            return eps;
        }
        eps = if up { eps * 2.0 } else { eps * 0.5 };
    }
    eps
}

struct Welford {
    n: f64,
    mean: DVector<f64>,
    m2: DMatrix<f64>,
}

impl Welford {
    fn new(d: usize) -> Self {
        Self {
            n: 0.0,
            mean: DVector::zeros(d),
            m2: DMatrix::zeros(d, d),
        }
    }

    fn push(&mut self, x: &[f64]) {
        self.n += 1.0;
        let x = DVector::from_column_slice(x);
        let delta = &x - &self.mean;
        self.mean += &delta / self.n;
        self.m2 += &delta * (&x - &self.mean).transpose();
    }

    /// Covariance shrunk towards 1e-3 · I, as in Stan's adaptation.
    fn metric(&self, kind: MetricKind) -> Metric {
        let n = self.n;
        let d = self.mean.len();
        let cov = &self.m2 / (n - 1.0);
        let shrunk = cov * (n / (n + 5.0)) + DMatrix::identity(d, d) * (1e-3 * 5.0 / (n + 5.0));
        let diag = || Metric::Diagonal(shrunk.diagonal().iter().copied().collect());
        match kind {
            MetricKind::Diagonal => diag(),
            MetricKind::Dense => Metric::dense(shrunk.clone()).unwrap_or_else(diag),
        }
    }
}

/// Runs one chain with its own ChaCha stream.
pub fn sample_chain<T: LogDensity + ?Sized>(
    target: &T,
    cfg: &SamplerConfig,
    chain: usize,
) -> Result<ChainDraws, SamplerError> {
    cfg.validate()?;
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let stream = chain as u64 + 1;
    rng.set_stream(stream);

    let base = target.initial_point();
    let dim = base.len();
    const ATTEMPTS: usize = 100;
    let mut state = None;
    for _ in 0..ATTEMPTS {
        let x: Vec<f64> = base
            .iter()
            .map(|b| b + cfg.init_jitter * rng.sample::<f64, _>(StandardNormal))
            .collect();
        if let Some(s) = evaluate(target, x) {
            state = Some(s);
            break;
        }
    }
    let mut state = state.ok_or(SamplerError::Initialization {
        chain,
        attempts: ATTEMPTS,
    })?;
    if cfg.optimize_init {
        let mode = super::find_mode(target, &state.x, 500)
            .map_err(|message| SamplerError::ModeSearch { chain, message })?;
        if let Some(s) = evaluate(target, mode.x) {
            state = s;
        }
    }

    let mut metric = Metric::unit(dim);
    let mut eps = initial_step(target, &state, &mut rng, &metric).clamp(cfg.min_step, cfg.max_step);
    let mut da = DualAveraging::new(eps, cfg.target_accept);
    let (init_buffer, window_ends) = adaptation_windows(cfg.warmup);
    let mut window = Welford::new(dim);
    let mut next_end = 0;

    let mut warmup_div = 0;
    let mut warmup_accept = 0.0;
    let mut leapfrog_steps = 0u64;
    for it in 0..cfg.warmup {
        let tr = transition(target, &mut state, &mut rng, eps, &metric, cfg);
        leapfrog_steps += tr.steps as u64;
        warmup_div += tr.divergent as usize;
        warmup_accept += tr.accept;
        eps = da.update(tr.accept).clamp(cfg.min_step, cfg.max_step);
        if cfg.adapt_mass && it >= init_buffer && next_end < window_ends.len() {
            window.push(&state.x);
            if it + 1 == window_ends[next_end] {
                metric = window.metric(cfg.metric);
                window = Welford::new(dim);
                next_end += 1;
                eps = initial_step(target, &state, &mut rng, &metric).clamp(cfg.min_step, cfg.max_step);
                da = DualAveraging::new(eps, cfg.target_accept);
            }
        }
    }
    if cfg.warmup > 0 {
        if warmup_div == cfg.warmup {
            return Err(SamplerError::AllDivergent { chain });
        }
        eps = da.final_step().clamp(cfg.min_step, cfg.max_step);
    }

    let mut draws = Vec::with_capacity(cfg.samples);
    let mut lp = Vec::with_capacity(cfg.samples);
    let mut accept_stat = Vec::with_capacity(cfg.samples);
    let mut divergent = Vec::with_capacity(cfg.samples);
    let mut acc_total = 0.0;
    let mut div_total = 0;
    for it in 0..cfg.samples * cfg.thin {
        let tr = transition(target, &mut state, &mut rng, eps, &metric, cfg);
        leapfrog_steps += tr.steps as u64;
        acc_total += tr.accept;
        div_total += tr.divergent as usize;
        if (it + 1) % cfg.thin == 0 {
            draws.push(state.x.clone());
            lp.push(state.lp);
            accept_stat.push(tr.accept);
            divergent.push(tr.divergent);
        }
    }

    let constrained = draws.iter().map(|x| target.constrain(x)).collect();
    let loglik: Option<Vec<Vec<f64>>> = draws.iter().map(|x| target.pointwise_loglik(x)).collect();
    let log_prior: Option<Vec<f64>> = draws.iter().map(|x| target.log_prior(x)).collect();
    let total_iters = (cfg.samples * cfg.thin) as f64;
    Ok(ChainDraws {
        names: target.param_names(),
        draws,
        constrained,
        lp,
        loglik,
        log_prior,
        accept_stat,
        divergent,
        meta: ChainMeta {
            chain,
            seed: cfg.seed,
            stream,
            step_size: eps,
            inv_metric: metric.diagonal(),
            accept_rate: acc_total / total_iters,
            warmup_accept_rate: if cfg.warmup > 0 {
                warmup_accept / cfg.warmup as f64
            } else {
                f64::NAN
            },
            divergences: div_total,
            warmup_divergences: warmup_div,
            leapfrog_steps,
            wall_time_secs: started.elapsed().as_secs_f64(),
        },
    })
}

/// Runs `chains` chains concurrently. Chain `c` uses the ChaCha8 generator
/// seeded with `cfg.seed` on stream `c + 1`.
pub fn hmc_sample<T: LogDensity + ?Sized>(
    target: &T,
    cfg: &SamplerConfig,
    chains: usize,
) -> Result<Vec<ChainDraws>, SamplerError> {
    cfg.validate()?;
    if chains == 0 {
        return Err(SamplerError::InvalidConfig("need at least one chain".into()));
    }
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..chains)
            .map(|c| scope.spawn(move || sample_chain(target, cfg, c)))
            .collect();
        handles
            .into_iter()
            .enumerate()
            .map(|(c, h)| h.join().unwrap_or(Err(SamplerError::Panicked { chain: c })))
            .collect()
    })
}
