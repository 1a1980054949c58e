#![allow(dead_code)]

use seirfit_core::epi::{DelayKind, DelayPmf, ModelConfig, ParamVector};

/// Plain re-derivation of the recursions, written day by day from the
/// model equations with no shared helpers. Returns `None` when a state
/// leaves its feasible region. Vectors are 1-based (slot 0 unused).
pub struct OraclePaths {
    pub c: Vec<f64>,
    pub s: Vec<f64>,
    pub i: Vec<f64>,
    pub r: Vec<f64>,
    pub theta: Vec<f64>,
}

pub fn oracle_paths(
    p: &ParamVector,
    cfg: &ModelConfig,
    death: &DelayPmf,
    recovery: Option<&DelayPmf>,
    rho: &[f64],
) -> Option<OraclePaths> {
    let n = cfg.n;
    let tau = cfg.infectious_period;
    let h = if cfg.flags.exposed { cfg.exposed_period } else { 0 };
    let big_n = cfg.population;
    let a = if cfg.flags.demography { cfg.births_per_day } else { 0.0 };
    let last_update = n as i64 - h as i64 - 2;

    let lambda = |t: usize| -> f64 {
        let u = &cfg.changepoints;
        let mut val = p.lambdas[p.lambdas.len() - 1];
        for j in 0..p.lambdas.len() {
            if t >= u[j] && t < u[j + 1] {
                val = p.lambdas[j];
            }
        }
        if t < u[0] {
            val = p.lambdas[0];
        }
        val
    };
    let ifr = |t: usize| -> f64 {
        let l = &cfg.ifr_breaks;
        if t < l[0] {
            return p.ifrs[0];
        }
        let mut val = p.ifrs[p.ifrs.len() - 1];
        for b in 0..p.ifrs.len() {
            if t >= l[b] && t < l[b + 1] {
                val = p.ifrs[b];
            }
        }
        val
    };
    let pi = |pmf: &DelayPmf, s: usize| -> f64 {
        if s >= 1 && s <= pmf.masses().len() {
            pmf.masses()[s - 1]
        } else {
            0.0
        }
    };

    let mut c = vec![0.0; n + 1];
    let mut s = vec![0.0; n + 1];
    let mut i = vec![0.0; n + 1];
    let mut r = vec![0.0; n + 1];

    for t in 1..=n {
        if t <= tau + h {
            c[t] = p.c_init;
        }
    }
    s[1] = big_n - c[1];
    i[1] = c[1];
    r[1] = 0.0;

    for t in 2..=n {
        if t >= tau + h + 1 && t + 1 <= n {
            let k = t - 1 - h;
            c[t] = lambda(k) * s[k] * i[k] / big_n;
        } else if t > tau + h {
            c[t] = c[t - 1];
        }

        if t >= tau && (t as i64) <= last_update {
            let mut v = 0.0;
            if cfg.flags.vaccination {
                if t >= 15 && (t as i64) <= last_update {
                    v += cfg.immunity_first * rho[t - 14 - 1];
                }
                if t >= 36 && (t as i64) <= last_update {
                    v += cfg.immunity_second * rho[t - 35 - 1];
                }
            }
            let mut back = 0.0;
            if cfg.flags.seirs && t > cfg.waning_delay {
                let tt = t - cfg.waning_delay;
                if tt >= 2 {
                    let mut acc = 0.0;
                    for k in 1..tt {
                        acc += pi(recovery.unwrap(), tt - k) * c[k];
                    }
                    back = (1.0 - ifr(tt)) * acc;
                }
            }
            let mut active = 0.0;
            for k in 0..tau {
                active += c[t - k];
            }
            let mut gone = 0.0;
            for k in 1..=(t - tau) {
                gone += c[k];
            }
            s[t] = s[t - 1] - c[t] - v + a * (1.0 - s[t - 1] / big_n) + back;
            i[t] = active - a * i[t - 1] / big_n;
            r[t] = gone + v - a * r[t - 1] / big_n;
        } else {
            s[t] = s[t - 1];
            i[t] = i[t - 1];
            r[t] = r[t - 1];
        }
    }

    for t in 1..=n {
        let ok = c[t] >= 0.0 && s[t] >= 0.0 && s[t] <= big_n * (1.0 + 1e-12) && i[t] >= 0.0 && r[t] >= 0.0;
        if !ok || !(c[t] + s[t] + i[t] + r[t]).is_finite() {
            return None;
        }
    }

    let mut theta = vec![0.0; n + 1];
    for t in 2..=n {
        let mut acc = 0.0;
        for k in 1..t {
            acc += pi(death, t - k) * c[k];
        }
        theta[t] = ifr(t) * acc;
    }
    Some(OraclePaths { c, s, i, r, theta })
}

pub fn relative_close(a: f64, b: f64, tol: f64) -> bool {
    let scale = a.abs().max(b.abs()).max(1e-300);
    a == b || (a - b).abs() / scale <= tol
}

/// Geometric-tail toy pmf used where the exact delay shape does not matter.
pub fn toy_pmf(kind: DelayKind, n: usize, decay: f64) -> DelayPmf {
    let raw: Vec<f64> = (1..n).map(|s| (1.0 - decay) * decay.powi(s as i32 - 1)).collect();
    DelayPmf::from_masses(kind, raw).unwrap()
}
