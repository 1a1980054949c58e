mod common;

use common::{oracle_paths, relative_close, toy_pmf};
use proptest::prelude::*;
use rand::rngs::ChaCha8Rng;
use rand::{RngExt, SeedableRng};
use rand_distr::{Distribution, Gamma};
use seirfit_core::epi::*;

fn model(cfg: ModelConfig, rho: Vec<f64>) -> EpiModel {
    let death = toy_pmf(DelayKind::InfectionToDeath, cfg.n, 0.7);
    let recovery = Some(toy_pmf(DelayKind::InfectionToRecovery, cfg.n, 0.5));
    EpiModel::new(cfg, death, recovery, rho).unwrap()
}

fn assert_matches_oracle(params: &ParamVector, m: &EpiModel) {
    let got = m.simulate(params);
    let want = oracle_paths(params, &m.config, &m.death_delay, m.recovery_delay.as_ref(), &m.vaccinations);
    match (got, want) {
        (Err(_), None) => {}
        (Ok(p), Some(o)) => {
            for t in 1..=m.config.n {
                for (name, a, b) in [
                    ("C", p.cases[t - 1], o.c[t]),
                    ("S", p.susceptible[t - 1], o.s[t]),
                    ("I", p.infectious[t - 1], o.i[t]),
                    ("R", p.removed[t - 1], o.r[t]),
                    ("theta", p.expected_deaths[t - 1], o.theta[t]),
                ] {
                    assert!(relative_close(a, b, 1e-12), "{name}_{t}: {a} vs {b} ({:?})", m.config.flags);
                }
            }
        }
        (got, want) => panic!(
            "feasibility disagrees: implementation {:?}, oracle feasible = {}",
            got.err(),
            want.is_some()
        ),
    }
}

#[test]
fn small_instance_matches_scalar_loop() {
    let mut cfg = ModelConfig::new(12, 1000.0);
    cfg.infectious_period = 2;
    cfg.exposed_period = 1;
    cfg.flags = ModelFlags::default();
    cfg.changepoints = vec![1, cfg.last_changepoint()];
    let m = model(cfg, vec![0.0; 12]);
    let params = ParamVector {
        lambdas: vec![0.5],
        ifrs: vec![0.01],
        psi: 10.0,
        c_init: 10.0,
        sigma: None,
    };
    assert_matches_oracle(&params, &m);
}

fn random_instance(rng: &mut ChaCha8Rng, flags: ModelFlags) -> (ParamVector, EpiModel) {
    let n = rng.random_range(10..=30usize);
    let mut cfg = ModelConfig::new(n, rng.random_range(2e3..1e5));
    cfg.flags = flags;
    cfg.infectious_period = rng.random_range(1..=5);
    cfg.exposed_period = rng.random_range(0..=3);
    cfg.waning_delay = rng.random_range(1..=8);
    cfg.births_per_day = rng.random_range(0.0..40.0);
    let last = cfg.last_changepoint();
    let mut interior: Vec<usize> = (2..last).filter(|_| rng.random_bool(0.15)).collect();
    interior.truncate(3);
    cfg = cfg.with_interior_changepoints(&interior);
    cfg.ifr_breaks = if rng.random_bool(0.5) { vec![1, n + 1] } else { vec![1, n / 2, n + 1] };
    let rho: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..50.0)).collect();
    let params = ParamVector {
        lambdas: (0..cfg.n_segments()).map(|_| rng.random_range(0.05..1.2)).collect(),
        ifrs: (0..cfg.n_ifr_segments()).map(|_| rng.random_range(0.001..0.05)).collect(),
        psi: 5.0,
        c_init: rng.random_range(1.0..60.0),
        sigma: None,
    };
    (params, model(cfg, rho))
}

fn all_flag_combinations() -> Vec<ModelFlags> {
    (0..16u8)
        .map(|bits| ModelFlags {
            exposed: bits & 1 != 0,
            vaccination: bits & 2 != 0,
            demography: bits & 4 != 0,
            seirs: bits & 8 != 0,
        })
        .collect()
}

#[test]
fn random_instances_match_scalar_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_611);
    let combos = all_flag_combinations();
    for k in 0..160 {
        let (params, m) = random_instance(&mut rng, combos[k % combos.len()]);
        assert_matches_oracle(&params, &m);
    }
}

#[test]
fn zero_rate_stops_transmission_after_seed() {
    let cfg = ModelConfig::new(40, 1e5);
    let m = model(cfg.clone(), vec![0.0; 40]);
    let params = ParamVector {
        lambdas: vec![0.0],
        ifrs: vec![0.01],
        psi: 5.0,
        c_init: 7.0,
        sigma: None,
    };
    let p = m.simulate(&params).unwrap();
    let seed_end = cfg.tau() + cfg.h();
    for t in 1..=40 {
        let expected = if t <= seed_end { 7.0 } else { 0.0 };
        assert_eq!(p.cases[t - 1], expected, "day {t}");
    }
    for t in seed_end + 1..=40 {
        assert_eq!(p.susceptible[t - 1], p.susceptible[seed_end - 1]);
    }
}

#[test]
fn births_only_population_approaches_n_from_below() {
    let mut cfg = ModelConfig::new(80, 1e4);
    cfg.flags.demography = true;
    cfg.births_per_day = 200.0;
    let m = model(cfg, vec![0.0; 80]);
    let params = ParamVector {
        lambdas: vec![0.0],
        ifrs: vec![0.01],
        psi: 5.0,
        c_init: 0.0,
        sigma: None,
    };
    let p = m.simulate(&params).unwrap();
    // c_init = 0 leaves S_1 = N, the fixed point of S + A(1 - S/N).
    assert!(p.susceptible.iter().all(|s| *s == 1e4));
    assert!(p.infectious.iter().all(|i| *i == 0.0));
}

#[test]
fn demography_keeps_active_set_feasible_only_while_cases_flow() {
    // With births on, I_t = Σ C - A I_{t-1}/N turns negative once the case
    // window empties; the path must be flagged rather than clamped.
    let mut cfg = ModelConfig::new(40, 1e4);
    cfg.flags.demography = true;
    cfg.births_per_day = 200.0;
    let m = model(cfg, vec![0.0; 40]);
    let params = ParamVector {
        lambdas: vec![0.0],
        ifrs: vec![0.01],
        psi: 5.0,
        c_init: 500.0,
        sigma: None,
    };
    let err = m.simulate(&params).unwrap_err();
    assert_eq!(err.state, StateKind::Infectious);
}

#[test]
fn susceptible_drops_by_cases_when_flags_off() {
    let mut cfg = ModelConfig::new(90, 5e5).with_interior_changepoints(&[30, 60]);
    cfg.flags.exposed = true;
    let m = model(cfg, vec![0.0; 90]);
    let params = ParamVector {
        lambdas: vec![0.6, 0.2, 0.4],
        ifrs: vec![0.01],
        psi: 5.0,
        c_init: 20.0,
        sigma: None,
    };
    let p = m.simulate(&params).unwrap();
    let (lo, hi) = m.config.ranges().states;
    for t in lo..=hi {
        let drop = p.susceptible[t - 2] - p.susceptible[t - 1];
        assert!((drop - p.cases[t - 1]).abs() <= 1e-9 * p.cases[t - 1].max(1.0), "day {t}");
    }
    for w in p.susceptible.windows(2) {
        assert!(w[1] <= w[0]);
    }
}

#[test]
fn overshooting_rate_is_flagged_not_clamped() {
    let cfg = ModelConfig::new(60, 1e3);
    let m = model(cfg, vec![0.0; 60]);
    let params = ParamVector {
        lambdas: vec![25.0],
        ifrs: vec![0.01],
        psi: 5.0,
        c_init: 50.0,
        sigma: None,
    };
    let err = m.simulate(&params).unwrap_err();
    assert!(matches!(err.state, StateKind::Susceptible | StateKind::Cases | StateKind::Infectious));
}

#[test]
fn vaccination_term_examples() {
    let rho = vec![100.0; 120];
    for t in 1..=14 {
        assert_eq!(vaccination_term(&rho, t, 0.4, 0.1, 120, 2), 0.0);
    }
    assert!((vaccination_term(&rho, 20, 0.4, 0.1, 120, 2) - 40.0).abs() < 1e-12);
    assert!((vaccination_term(&rho, 50, 0.4, 0.1, 120, 2) - 50.0).abs() < 1e-12);
    // past n - h - 2 both indicators are off
    assert_eq!(vaccination_term(&rho, 117, 0.4, 0.1, 120, 2), 0.0);

    let rho: Vec<f64> = (0..120).map(|t| (t % 7) as f64 * 13.0).collect();
    let total: f64 = (1..=120).map(|t| vaccination_term(&rho, t, 0.4, 0.1, 120, 2)).sum();
    assert!(total <= 0.5 * rho.iter().sum::<f64>());
}

#[test]
fn reentry_examples() {
    let pmf = toy_pmf(DelayKind::InfectionToRecovery, 30, 0.6);
    let cases: Vec<f64> = (0..30).map(|k| 10.0 + k as f64).collect();
    let dead = vec![1.0; 30];
    for t in 2..30 {
        assert_eq!(seirs_reentry(&cases, &dead, &pmf, t), 0.0);
    }
    let mut impulse = vec![0.0; 30];
    impulse[0] = 1.0;
    let alive = vec![0.0; 30];
    for t in 2..30 {
        assert!((seirs_reentry(&impulse, &alive, &pmf, t) - pmf.mass(t - 1)).abs() < 1e-15);
    }
    let total: f64 = (2..=30).map(|t| seirs_reentry(&cases, &alive, &pmf, t)).sum();
    assert!(total <= cases.iter().sum::<f64>());
}

#[test]
fn reproduction_number_examples() {
    let cfg = ModelConfig::new(20, 1000.0);
    let params = ParamVector {
        lambdas: vec![0.3],
        ifrs: vec![0.01],
        psi: 1.0,
        c_init: 1.0,
        sigma: None,
    };
    let rt = reproduction_series(&[1000.0, 500.0], &params, &cfg);
    assert!((rt[0] - 1.8).abs() < 1e-12);
    assert!((rt[1] - 0.9).abs() < 1e-12);
    let scaled = reproduction_series(&[250.0, 125.0], &params, &cfg);
    assert!((scaled[0] / rt[0] - 0.25).abs() < 1e-12);
}

#[test]
fn infection_to_death_mean_matches_monte_carlo() {
    let pmf = discretize_delay(&DelaySpec::infection_to_death(), DelayKind::InfectionToDeath, 400).unwrap();
    // Monte Carlo oracle: sample the two Gammas and apply the binning rule.
    let onset = Gamma::new(1.35, 1.0 / 0.27).unwrap();
    let death = Gamma::new(4.94, 1.0 / 0.26).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let draws = 1_000_000;
    let mut acc = 0.0;
    for _ in 0..draws {
        let x: f64 = onset.sample(&mut rng) + death.sample(&mut rng);
        let day = if x < 1.5 { 1.0 } else { (x + 0.5).floor() };
        acc += day;
    }
    let mc_mean = acc / draws as f64;
    assert!((pmf.mean() - mc_mean).abs() < 0.1, "pmf {} vs MC {mc_mean}", pmf.mean());
    assert!((pmf.mean() - 24.0).abs() < 0.1);
}

#[test]
fn pmf_invariant_to_grid_halving() {
    let spec = DelaySpec::infection_to_death();
    let coarse = discretize_delay_with_step(&spec, DelayKind::InfectionToDeath, 200, 0.01).unwrap();
    let fine = discretize_delay_with_step(&spec, DelayKind::InfectionToDeath, 200, 0.005).unwrap();
    for s in 1..200 {
        assert!((coarse.mass(s) - fine.mass(s)).abs() < 1e-8, "s = {s}");
    }
}

#[test]
fn concurrent_first_access_is_idempotent() {
    let spec = DelaySpec::gamma_sum(GammaDelay::new(2.5, 0.4), GammaDelay::new(3.0, 0.3));
    let pmfs: Vec<DelayPmf> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..8)
            .map(|_| scope.spawn(|| discretize_delay(&spec, DelayKind::SerialInterval, 60).unwrap()))
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    assert!(pmfs.windows(2).all(|w| w[0] == w[1]));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn more_vaccination_never_raises_susceptibles(
        seed in 0u64..10_000,
        extra in 0.0f64..200.0,
        day in 0usize..60,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cfg = ModelConfig::new(60, 1e5);
        cfg.flags.vaccination = true;
        let rho: Vec<f64> = (0..60).map(|_| rng.random_range(0.0..100.0)).collect();
        let mut more = rho.clone();
        more[day] += extra;
        let params = ParamVector {
            lambdas: vec![rng.random_range(0.1..0.4)],
            ifrs: vec![0.01],
            psi: 5.0,
            c_init: 5.0,
            sigma: None,
        };
        let base = model(cfg.clone(), rho.clone()).simulate(&params);
        let vacc = model(cfg.clone(), more.clone()).simulate(&params);
        // Averted infections can outweigh the doses (herd effect), so S itself is
        // not monotone in ρ; the susceptible pool net of infections is.
        if let (Ok(a), Ok(b)) = (base, vacc) {
            let (mut cum_a, mut cum_b) = (0.0, 0.0);
            for t in 0..60 {
                cum_a += a.cases[t];
                cum_b += b.cases[t];
                let lhs = b.susceptible[t] + cum_b;
                let rhs = a.susceptible[t] + cum_a;
                prop_assert!(lhs <= rhs + 1e-9 * rhs, "day {}: {} > {}", t + 1, lhs, rhs);
            }
        }

        // Without transmission S itself is monotone in ρ.
        let still = ParamVector { lambdas: vec![0.0], ..params };
        let a = model(cfg.clone(), rho).simulate(&still).unwrap();
        let b = model(cfg, more).simulate(&still).unwrap();
        for t in 0..60 {
            prop_assert!(b.susceptible[t] <= a.susceptible[t]);
        }
    }

    #[test]
    fn random_flags_match_oracle(seed in 0u64..u64::MAX, bits in 0u8..16) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let flags = all_flag_combinations()[bits as usize];
        let (params, m) = random_instance(&mut rng, flags);
        assert_matches_oracle(&params, &m);
    }
}

