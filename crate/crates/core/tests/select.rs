use std::f64::consts::PI;

use rand::rngs::ChaCha8Rng;
use rand::{RngExt, SeedableRng};
use rand_distr::StandardNormal;
use seirfit_core::inference::{hmc_sample, ChainDraws, LogDensity, SamplerConfig};
use seirfit_core::select::{
    bayes_factor, bridge_log_ml, criteria_from_loglik, endemicity_diagnostic, information_criteria, BridgeConfig,
    Evidence,
};

/// `y_i ~ N(μ + ν, 1)`, `μ ~ N(0, s0²)` and, when `nu_sd > 0`, `ν ~ N(0, nu_sd²)`.
struct NormalMean {
    y: Vec<f64>,
    s0: f64,
    nu_sd: f64,
}

fn ln_normal(x: f64, m: f64, sd: f64) -> f64 {
    let z = (x - m) / sd;
    -0.5 * z * z - sd.ln() - 0.5 * (2.0 * PI).ln()
}

impl NormalMean {
    fn shift(&self, x: &[f64]) -> f64 {
        x[0] + if self.nu_sd > 0.0 { x[1] } else { 0.0 }
    }

    fn posterior(&self) -> (f64, f64) {
        let v = 1.0 / (self.y.len() as f64 + 1.0 / (self.s0 * self.s0));
        (v * self.y.iter().sum::<f64>(), v)
    }

    fn log_evidence(&self) -> f64 {
        let n = self.y.len() as f64;
        let s2 = self.s0 * self.s0;
        let sum: f64 = self.y.iter().sum();
        let ss: f64 = self.y.iter().map(|v| v * v).sum();
        -0.5 * n * (2.0 * PI).ln() - 0.5 * (1.0 + n * s2).ln() - 0.5 * (ss - s2 * sum * sum / (1.0 + n * s2))
    }

    fn exact_draws(&self, m: usize, seed: u64) -> Vec<Vec<f64>> {
        let (mn, v) = self.posterior();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..m).map(|_| vec![mn + v.sqrt() * rng.sample::<f64, _>(StandardNormal)]).collect()
    }
}

impl LogDensity for NormalMean {
    fn dim(&self) -> usize {
        1 + (self.nu_sd > 0.0) as usize
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        LogDensity::log_prior(self, x).unwrap() + self.pointwise_loglik(x).unwrap().iter().sum::<f64>()
    }

    fn pointwise_loglik(&self, x: &[f64]) -> Option<Vec<f64>> {
        let m = self.shift(x);
        Some(self.y.iter().map(|y| ln_normal(*y, m, 1.0)).collect())
    }

    fn log_prior(&self, x: &[f64]) -> Option<f64> {
        let mut lp = ln_normal(x[0], 0.0, self.s0);
        if self.nu_sd > 0.0 {
            lp += ln_normal(x[1], 0.0, self.nu_sd);
        }
        Some(lp)
    }
}

fn toy(n: usize, nu_sd: f64) -> NormalMean {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let y = (0..n).map(|_| 0.7 + rng.sample::<f64, _>(StandardNormal)).collect();
    NormalMean { y, s0: 2.0, nu_sd }
}

fn sampled(model: &NormalMean, seed: u64) -> Vec<ChainDraws> {
    let cfg = SamplerConfig {
        seed,
        ..SamplerConfig::default()
    };
    hmc_sample(model, &cfg, 4).unwrap()
}

#[test]
fn bridge_matches_closed_form_evidence() {
    let model = toy(30, 0.0);
    let chains = sampled(&model, 1);
    let ev = bridge_log_ml(&model, &chains, &BridgeConfig::default()).unwrap();
    assert!((ev.log_ml - model.log_evidence()).abs() < 0.05, "{ev:?} vs {}", model.log_evidence());
    assert!(ev.error > 0.0 && ev.error < 0.05);
}

#[test]
fn identity_bridge_recovers_normalizing_constant() {
    // posterior is exactly Gaussian, so the fitted proposal is nearly the target
    let model = toy(30, 0.0);
    let draws = model.exact_draws(4000, 5);
    let chains: Vec<ChainDraws> = draws
        .chunks(1000)
        .enumerate()
        .map(|(i, c)| ChainDraws::from_target(&model, c.to_vec(), i))
        .collect();
    let ev = bridge_log_ml(&model, &chains, &BridgeConfig::default()).unwrap();
    assert!((ev.log_ml - model.log_evidence()).abs() < 3.0 * ev.error, "{ev:?}");
}

#[test]
fn self_bayes_factor_is_zero() {
    let model = toy(30, 0.0);
    let a = bridge_log_ml(&model, &sampled(&model, 2), &BridgeConfig { seed: 3, ..Default::default() }).unwrap();
    let b = bridge_log_ml(&model, &sampled(&model, 4), &BridgeConfig { seed: 5, ..Default::default() }).unwrap();
    let bf = bayes_factor(&a, &b);
    assert!(bf.log_bf.abs() < 2.0 * bf.error, "{bf:?}");
}

#[test]
fn doubling_proposal_draws_is_consistent() {
    let model = toy(30, 0.0);
    let chains = sampled(&model, 6);
    let one = bridge_log_ml(&model, &chains, &BridgeConfig::default()).unwrap();
    let two = bridge_log_ml(&model, &chains, &BridgeConfig { proposal_factor: 2, ..Default::default() }).unwrap();
    assert!((one.log_ml - two.log_ml).abs() < 3.0 * one.error.max(two.error), "{one:?} {two:?}");
}

#[test]
fn useless_parameter_is_not_favoured() {
    let small = toy(30, 0.0);
    let large = toy(30, 0.05);
    let a = bridge_log_ml(&small, &sampled(&small, 8), &BridgeConfig::default()).unwrap();
    let b = bridge_log_ml(&large, &sampled(&large, 9), &BridgeConfig::default()).unwrap();
    let bf = bayes_factor(&a, &b);
    assert!(bf.log_bf >= -2.0 * bf.error, "{bf:?}");
}

#[test]
fn bayes_factor_arithmetic() {
    let a = Evidence { log_ml: -100.0, error: 0.03, iterations: 1 };
    let b = Evidence { log_ml: -103.0, error: 0.04, iterations: 1 };
    assert_eq!(bayes_factor(&a, &b).log_bf, 3.0);
    assert_eq!(bayes_factor(&a, &b).log_bf, -bayes_factor(&b, &a).log_bf);
    assert!((bayes_factor(&a, &b).error - 0.05).abs() < 1e-15);
    assert_eq!(bayes_factor(&a, &a).log_bf, 0.0);
}

#[test]
fn waic_matches_brute_force_on_conjugate_model() {
    let model = toy(25, 0.0);
    let (mn, v) = model.posterior();
    let draws = model.exact_draws(4000, 11);
    let rows: Vec<Vec<f64>> = draws.iter().map(|x| model.pointwise_loglik(x).unwrap()).collect();
    let dev_at_mean = -2.0 * model.pointwise_loglik(&[mn]).unwrap().iter().sum::<f64>();
    let score = criteria_from_loglik(&rows, dev_at_mean, 1).unwrap();

    let brute = model.exact_draws(1_000_000, 12);
    let (mut lppd, mut p_waic) = (0.0, 0.0);
    for y in &model.y {
        let ll: Vec<f64> = brute.iter().map(|x| ln_normal(*y, x[0], 1.0)).collect();
        let m = ll.len() as f64;
        let mean = ll.iter().sum::<f64>() / m;
        lppd += (ll.iter().map(|v| v.exp()).sum::<f64>() / m).ln();
        p_waic += ll.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
        // analytic cross-check of the brute-force terms
        let a = y - mn;
        assert!((p_waic_term(a, v) - ll.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0)).abs() < 1e-3);
    }
    let brute_waic = -2.0 * (lppd - p_waic);
    assert!((score.waic - brute_waic).abs() < 0.1, "{} vs {brute_waic}", score.waic);
    assert!(score.p_waic >= 0.0 && score.p_dic2 >= 0.0);
    let analytic_lppd: f64 = model.y.iter().map(|y| ln_normal(*y, mn, (1.0 + v).sqrt())).sum();
    assert!((lppd - analytic_lppd).abs() < 1e-3);
}

fn p_waic_term(a: f64, v: f64) -> f64 {
    a * a * v + 0.5 * v * v
}

#[test]
fn criteria_from_sampled_draws_are_finite() {
    let model = toy(30, 0.0);
    let chains = sampled(&model, 13);
    let s = information_criteria(&model, &chains, 1, None).unwrap();
    assert!(s.waic.is_finite() && s.dic.is_finite() && s.dic2.is_finite());
    assert!(s.p_waic >= 0.0 && s.p_dic2 >= 0.0);
    assert!((s.p_dic - 1.0).abs() < 0.2, "{}", s.p_dic);
    let raised = information_criteria(&model, &chains, 1, Some(s.max_loglik + 1.0)).unwrap();
    assert!((raised.aic - (s.aic - 2.0)).abs() < 1e-9);
}

#[test]
fn endemicity_degenerate_factor_has_zero_covariance() {
    let lambda = vec![vec![0.2, 0.3], vec![0.4, 0.1], vec![0.3, 0.3]];
    let s = vec![vec![500.0, 400.0]; 3];
    let r = endemicity_diagnostic(&lambda, &s, 6.0, 1000.0).unwrap();
    assert_eq!(r.covariance, vec![0.0, 0.0]);
    assert_eq!(r.correlation, vec![None, None]);
}

#[test]
fn endemicity_perfect_linearity() {
    let factors = [0.9, 1.2, 2.0, 0.4];
    let s: Vec<Vec<f64>> = factors.iter().map(|f| vec![f * 1000.0 / 6.0]).collect();
    let lambda: Vec<Vec<f64>> = factors.iter().map(|f| vec![0.35 * f]).collect();
    let r = endemicity_diagnostic(&lambda, &s, 6.0, 1000.0).unwrap();
    assert!((r.correlation[0].unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn endemicity_detects_constructed_sign_change() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let draws = 400;
    let days = 100;
    let (mut lambda, mut s) = (Vec::new(), Vec::new());
    for _ in 0..draws {
        let z: f64 = rng.sample(StandardNormal);
        let e: Vec<f64> = (0..days).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        lambda.push((0..days).map(|t| 0.3 + 0.05 * z + 0.01 * e[t]).collect::<Vec<f64>>());
        s.push(
            (1..=days)
                .map(|t| {
                    let sign = if t < 50 { 1.0 } else { -1.0 };
                    5e5 + 5e4 * sign * z
                })
                .collect::<Vec<f64>>(),
        );
    }
    let r = endemicity_diagnostic(&lambda, &s, 6.0, 1e6).unwrap();
    assert_eq!(r.first_negative_day, Some(50));
    assert!(r.covariance[48] > 0.0 && r.covariance[49] < 0.0);
}
