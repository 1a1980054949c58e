//! The six commands and the artifacts they write.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use chrono::NaiveDate;
use serde::Serialize;
use seirfit_core::epi::{lambda_series, EpiModel, Likelihood, ModelFlags, ParamVector};
use seirfit_core::inference::{
    diagnostics, hmc_sample, observed_proportion, quantile, AnnealSchedule, ChainDraws,
    ParamDiagnostics,
};
use seirfit_core::obs::{daily_ifr, EpiPosterior};
use seirfit_core::phase::{
    conserved_q, effectiveness_l, effectiveness_m, natural_course, speed_series, work, CourseLabel,
    SirField, Trajectory,
};
use seirfit_core::select::{bayes_factor, bridge_log_ml, information_criteria, refine_max_loglik, ModelScore};

use crate::config::{parse_flags, RunConfig};
use crate::dataset::{Dataset, DATE_FORMAT};
use crate::error::CliError;
use crate::synth::{generate_synthetic, TruthRecord};

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::stage("export", e))?;
    text.push('\n');
    write_file(path, text)
}

fn fmt_date(d: NaiveDate) -> String {
    d.format(DATE_FORMAT).to_string()
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

/// A model built for one dataset, ready to sample.
pub struct Problem {
    pub flags: ModelFlags,
    pub likelihood: Likelihood,
    pub posterior: EpiPosterior,
}

impl Problem {
    pub fn new(cfg: &RunConfig, dataset: &Dataset, flags: ModelFlags, likelihood: Likelihood) -> Result<Self, CliError> {
        let model = cfg.build_model(flags, likelihood, dataset.vaccinations.clone())?;
        let priors = cfg.prior_spec(dataset, &model.config.ifr_breaks)?;
        let posterior = EpiPosterior::new(model, dataset.deaths.clone(), priors)
            .map_err(|e| CliError::Config(e.to_string()))?;
        Ok(Self { flags, likelihood, posterior })
    }

    pub fn model(&self) -> &EpiModel {
        self.posterior.model()
    }

    /// Parameters from constrained values in layout order.
    pub fn params_from_constrained(&self, values: &[f64]) -> ParamVector {
        let layout = self.posterior.layout();
        let x: Vec<f64> = values
            .iter()
            .enumerate()
            .map(|(i, v)| layout.transform(i).unconstrain(*v))
            .collect();
        self.posterior.to_params(&x)
    }
}

pub struct Fit {
    pub chains: Vec<ChainDraws>,
    pub diagnostics: Vec<ParamDiagnostics>,
    pub wall_time_secs: f64,
}

pub fn run_fit(cfg: &RunConfig, problem: &Problem) -> Result<Fit, CliError> {
    let mut sampler = cfg.sampler.clone();
    sampler.seed = cfg.seed;
    let t0 = Instant::now();
    let chains = hmc_sample(&problem.posterior, &sampler, cfg.chains).map_err(|e| CliError::stage("fit", e))?;
    let wall_time_secs = t0.elapsed().as_secs_f64();
    let diagnostics = diagnostics(&chains).map_err(|e| CliError::stage("fit", e))?;
    Ok(Fit { chains, diagnostics, wall_time_secs })
}

fn units_line(command: &str, problem: &Problem) -> String {
    format!(
        "# seirfit {command}; model={} likelihood={}; lambda per day, ifr probability, psi dispersion, \
         c_init persons/day, sigma persons/day; lp log posterior on the unconstrained scale",
        problem.flags.label(),
        problem.likelihood.short_name()
    )
}

/// One row per retained draw, constrained values.
pub fn draws_csv(problem: &Problem, chains: &[ChainDraws]) -> String {
    let mut out = units_line("fit", problem);
    out.push('\n');
    out.push_str("chain,draw,lp");
    for name in problem.posterior.layout().names() {
        out.push(',');
        out.push_str(&name);
    }
    out.push('\n');
    for c in chains {
        for (m, (row, lp)) in c.constrained.iter().zip(&c.lp).enumerate() {
            out.push_str(&format!("{},{},{}", c.meta.chain, m + 1, lp));
            for v in row {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
    }
    out
}

/// Constrained draws read back from a draws CSV.
pub struct DrawTable {
    pub names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

pub fn read_draws(path: &Path) -> Result<DrawTable, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let malformed = |line: u64, message: String, content: String| CliError::Malformed {
        file: path.into(),
        line,
        message,
        content,
    };
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| malformed(1, e.to_string(), String::new()))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.len() < 4 || header[..3] != ["chain", "draw", "lp"] {
        return Err(malformed(1, "expected chain,draw,lp,<parameters>".into(), header.join(",")));
    }
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| malformed(e.position().map_or(0, |p| p.line()), e.to_string(), String::new()))?;
        let line = rec.position().map_or(0, |p| p.line());
        let vals = rec
            .iter()
            .skip(3)
            .map(str::parse::<f64>)
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| malformed(line, e.to_string(), rec.iter().collect::<Vec<_>>().join(",")))?;
        rows.push(vals);
    }
    if rows.is_empty() {
        return Err(CliError::Validation(format!("{}: no draws", path.display())));
    }
    Ok(DrawTable { names: header[3..].to_vec(), rows })
}

fn check_names(problem: &Problem, table: &DrawTable, path: &Path) -> Result<(), CliError> {
    let expected = problem.posterior.layout().names();
    if expected != table.names {
        return Err(CliError::Config(format!(
            "{} holds parameters {:?} but the configured model has {:?}",
            path.display(),
            table.names,
            expected
        )));
    }
    Ok(())
}

#[derive(Serialize)]
struct ChainSummary {
    chain: usize,
    seed: u64,
    stream: u64,
    step_size: f64,
    accept_rate: f64,
    divergences: usize,
    leapfrog_steps: u64,
    wall_time_secs: f64,
}

#[derive(Serialize)]
struct FitSummary<'a> {
    command: &'static str,
    units: &'static str,
    model: String,
    likelihood: &'static str,
    seed: u64,
    chains: usize,
    warmup: usize,
    samples: usize,
    days: usize,
    start_date: String,
    parameters: &'a [ParamDiagnostics],
    max_rhat: Option<f64>,
    min_ess_bulk: Option<f64>,
    accept_rate: f64,
    divergences: usize,
    chain_summaries: Vec<ChainSummary>,
    wall_time_secs: f64,
}

fn max_rhat(d: &[ParamDiagnostics]) -> Option<f64> {
    d.iter().filter_map(|p| p.rhat).reduce(f64::max)
}

pub fn fit_summary_json(cfg: &RunConfig, problem: &Problem, dataset: &Dataset, fit: &Fit) -> Result<String, CliError> {
    let chains = &fit.chains;
    let summary = FitSummary {
        command: "fit",
        units: "rhat and ess are dimensionless; accept_rate is the mean acceptance statistic; times in seconds",
        model: problem.flags.label(),
        likelihood: problem.likelihood.short_name(),
        seed: cfg.seed,
        chains: chains.len(),
        warmup: cfg.sampler.warmup,
        samples: chains.first().map_or(0, ChainDraws::len),
        days: dataset.len(),
        start_date: fmt_date(dataset.start),
        parameters: &fit.diagnostics,
        max_rhat: max_rhat(&fit.diagnostics),
        min_ess_bulk: fit.diagnostics.iter().filter_map(|p| p.ess_bulk).reduce(f64::min),
        accept_rate: chains.iter().map(|c| c.meta.accept_rate).sum::<f64>() / chains.len() as f64,
        divergences: chains.iter().map(|c| c.meta.divergences).sum(),
        chain_summaries: chains
            .iter()
            .map(|c| ChainSummary {
                chain: c.meta.chain,
                seed: c.meta.seed,
                stream: c.meta.stream,
                step_size: c.meta.step_size,
                accept_rate: c.meta.accept_rate,
                divergences: c.meta.divergences,
                leapfrog_steps: c.meta.leapfrog_steps,
                wall_time_secs: c.meta.wall_time_secs,
            })
            .collect(),
        wall_time_secs: fit.wall_time_secs,
    };
    let mut text = serde_json::to_string_pretty(&summary).map_err(|e| CliError::stage("export", e))?;
    text.push('\n');
    Ok(text)
}

fn load(cfg: &RunConfig) -> Result<Dataset, CliError> {
    let (dataset, report) = cfg.load_dataset()?;
    if report.filled > 0 {
        eprintln!("warning: zero-filled {} missing interior day(s)", report.filled);
    }
    if report.dropped > 0 {
        eprintln!("warning: ignored {} row(s) outside the deaths calendar", report.dropped);
    }
    Ok(dataset)
}

/// `fit`: draws.csv and summary.json.
pub fn cmd_fit(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let dataset = load(cfg)?;
    let problem = Problem::new(cfg, &dataset, cfg.flags()?, cfg.likelihood()?)?;
    let fit = run_fit(cfg, &problem)?;
    let draws = cfg.output_dir.join("draws.csv");
    let summary = cfg.output_dir.join("summary.json");
    write_file(&draws, draws_csv(&problem, &fit.chains))?;
    write_file(&summary, fit_summary_json(cfg, &problem, &dataset, &fit)?)?;
    Ok(vec![draws, summary])
}

/// `simulate`: dataset.csv and truth.json.
pub fn cmd_simulate(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let s = &cfg.synthetic;
    let n = s.days;
    let mut vaccinations = vec![0.0; n];
    for v in vaccinations.iter_mut().skip(s.vaccination_start.saturating_sub(1)) {
        *v = s.vaccinations_per_day;
    }
    let model = cfg.build_model(cfg.flags()?, cfg.likelihood()?, vaccinations)?;
    let truth = cfg.synthetic_truth();
    truth
        .validate(model.config.n_segments(), model.config.n_ifr_segments())
        .map_err(|e| CliError::Config(format!("synthetic truth: {e}")))?;
    let (dataset, record): (Dataset, TruthRecord) =
        generate_synthetic(&model, &truth, s.reporting, s.age_shares, s.start_date, cfg.seed)?;
    let data = cfg.output_dir.join("dataset.csv");
    let truth_path = cfg.output_dir.join("truth.json");
    dataset.write_csv(&data, "simulate")?;
    write_json(&truth_path, &record)?;
    Ok(vec![data, truth_path])
}

#[derive(Debug, Clone, Serialize)]
pub struct VariantScore {
    pub model: String,
    pub likelihood: &'static str,
    pub score: ModelScore,
    pub divergences: usize,
    pub max_rhat: Option<f64>,
    pub wall_time_secs: f64,
}

pub fn score_variant(cfg: &RunConfig, problem: &Problem) -> Result<VariantScore, CliError> {
    let t0 = Instant::now();
    let fit = run_fit(cfg, problem)?;
    let post = &problem.posterior;
    let k = post.n_free();
    let refined = if cfg.select.refine {
        let schedule = AnnealSchedule { steps: cfg.select.anneal_steps, ..AnnealSchedule::default() };
        refine_max_loglik(post, &fit.chains, &schedule, cfg.seed)
    } else {
        None
    };
    let mut score =
        information_criteria(post, &fit.chains, k, refined).map_err(|e| CliError::stage("select", e))?;
    match bridge_log_ml(post, &fit.chains, &cfg.select.bridge) {
        Ok(ev) => {
            score.log_ml = Some(ev.log_ml);
            score.log_ml_error = Some(ev.error);
        }
        Err(e) => eprintln!("warning: {}: marginal likelihood unavailable: {e}", problem.flags.label()),
    }
    Ok(VariantScore {
        model: problem.flags.label(),
        likelihood: problem.likelihood.short_name(),
        score,
        divergences: fit.chains.iter().map(|c| c.meta.divergences).sum(),
        max_rhat: max_rhat(&fit.diagnostics),
        wall_time_secs: t0.elapsed().as_secs_f64(),
    })
}

pub fn scores_csv(scores: &[VariantScore]) -> String {
    let best = scores
        .iter()
        .filter_map(|s| s.score.log_ml.zip(s.score.log_ml_error))
        .max_by(|a, b| a.0.total_cmp(&b.0));
    let mut out = String::from(
        "# seirfit select; aic, bic, dic, dic2 and waic on the deviance scale (lower is better); \
         log_ml and log_bf_vs_best in nats; wall_time_secs in seconds\n",
    );
    out.push_str(
        "model,likelihood,k,n_obs,max_loglik,aic,bic,dic,p_dic,dic2,p_dic2,waic,p_waic,\
         log_ml,log_ml_error,log_bf_vs_best,divergences,max_rhat,wall_time_secs\n",
    );
    for v in scores {
        let s = &v.score;
        let bf = match (s.log_ml.zip(s.log_ml_error), best) {
            (Some((m, e)), Some(b)) => Some(bayes_factor(
                &seirfit_core::select::Evidence { log_ml: m, error: e, iterations: 0 },
                &seirfit_core::select::Evidence { log_ml: b.0, error: b.1, iterations: 0 },
            )),
            _ => None,
        };
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            v.model,
            v.likelihood,
            s.k,
            s.n_obs,
            s.max_loglik,
            s.aic,
            s.bic,
            s.dic,
            s.p_dic,
            s.dic2,
            s.p_dic2,
            s.waic,
            s.p_waic,
            opt(s.log_ml),
            opt(s.log_ml_error),
            opt(bf.map(|b| b.log_bf)),
            v.divergences,
            opt(v.max_rhat),
            v.wall_time_secs
        ));
    }
    out
}

/// `select`: scores.csv over the configured variants.
pub fn cmd_select(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let dataset = load(cfg)?;
    let likelihood = cfg.likelihood()?;
    if cfg.select.variants.is_empty() {
        return Err(CliError::Config("select.variants is empty".into()));
    }
    let mut scores = Vec::new();
    for label in &cfg.select.variants {
        let flags = parse_flags(label)?;
        eprintln!("fitting {label}");
        let problem = Problem::new(cfg, &dataset, flags, likelihood)?;
        scores.push(score_variant(cfg, &problem)?);
    }
    let path = cfg.output_dir.join("scores.csv");
    write_file(&path, scores_csv(&scores))?;
    Ok(vec![path])
}

/// Posterior median of every constrained column.
fn median_params(problem: &Problem, table: &DrawTable) -> ParamVector {
    let medians: Vec<f64> = (0..table.names.len())
        .map(|p| quantile(&table.rows.iter().map(|r| r[p]).collect::<Vec<_>>(), 0.5))
        .collect();
    problem.params_from_constrained(&medians)
}

fn window(traj: &Trajectory, a: usize, b: usize, label: CourseLabel) -> Result<Trajectory, CliError> {
    Trajectory::new(traj.times[a - 1..b].to_vec(), traj.points[a - 1..b].to_vec(), label)
        .map_err(|e| CliError::stage("phase", e))
}

#[derive(Debug, Clone, Serialize)]
pub struct Comparison {
    pub reference: CourseLabel,
    pub course: CourseLabel,
    pub l: Option<f64>,
    pub m: Option<f64>,
    pub work_reference: f64,
    pub work_course: f64,
    pub note: Option<String>,
}

fn compare(reference: &Trajectory, course: &Trajectory) -> Result<Comparison, CliError> {
    let b = reference.len() - 1;
    let mut notes = Vec::new();
    let l = effectiveness_l(reference, course, 0, b).map_err(|e| notes.push(e.to_string())).ok();
    let m = effectiveness_m(reference, course, 0, b).map_err(|e| notes.push(e.to_string())).ok();
    Ok(Comparison {
        reference: reference.label,
        course: course.label,
        l,
        m,
        work_reference: work(reference, 0, b).map_err(|e| CliError::stage("phase", e))?,
        work_course: work(course, 0, b).map_err(|e| CliError::stage("phase", e))?,
        note: (!notes.is_empty()).then(|| notes.join("; ")),
    })
}

#[derive(Serialize)]
struct PhaseSummary {
    command: &'static str,
    units: &'static str,
    model: String,
    start_date: String,
    end_date: String,
    natural_lambda: f64,
    tau: f64,
    comparisons: Vec<Comparison>,
    q_mean: f64,
    q_deviation: f64,
    departure_day: Option<usize>,
    departure_date: Option<String>,
}

/// `phase`: trajectory.csv and measures.json from the posterior-median course.
pub fn cmd_phase(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let dataset = load(cfg)?;
    let problem = Problem::new(cfg, &dataset, cfg.flags()?, cfg.likelihood()?)?;
    let draws_path = cfg.draws_path(&cfg.phase.draws);
    let table = read_draws(&draws_path)?;
    check_names(&problem, &table, &draws_path)?;
    let params = median_params(&problem, &table);
    let model = problem.model();
    let mcfg = &model.config;
    let n = mcfg.n;
    let pop = mcfg.population;
    let tau = mcfg.tau() as f64;
    let a = cfg.phase.start_day.unwrap_or_else(|| mcfg.changepoints.get(1).copied().filter(|u| *u < n).unwrap_or(1));
    let b = cfg.phase.end_day.unwrap_or(n);
    if !(1 <= a && a < b && b <= n) {
        return Err(CliError::Config(format!("phase window [{a}, {b}] must satisfy 1 <= start < end <= {n}")));
    }

    let paths = model.simulate(&params).map_err(|e| CliError::stage("phase", e))?;
    let actual_full = Trajectory::from_paths(&paths, pop, CourseLabel::Actual).map_err(|e| CliError::stage("phase", e))?;
    let actual = window(&actual_full, a, b, CourseLabel::Actual)?;
    let lambdas_actual = lambda_series(&params, mcfg);

    let natural_lambda = cfg.phase.natural_lambda.unwrap_or(params.lambdas[0]);
    let field = SirField::new(natural_lambda, tau, pop).map_err(|e| CliError::stage("phase", e))?;
    let per_day = (1.0 / cfg.phase.dt).round().max(1.0) as usize;
    let fine = natural_course(&field, (actual.points[0][0], actual.points[0][1]), (b - a) as f64, 1.0 / per_day as f64)
        .map_err(|e| CliError::stage("phase", e))?;
    let natural = Trajectory::new(
        actual.times.clone(),
        (0..=b - a).map(|j| fine.points[j * per_day]).collect(),
        CourseLabel::Natural,
    )
    .map_err(|e| CliError::stage("phase", e))?;

    let mut courses = vec![(natural.clone(), vec![natural_lambda; natural.len()]), (actual.clone(), lambdas_actual[a - 1..b].to_vec())];
    let mut comparisons = vec![compare(&natural, &actual)?];
    if let Some(lams) = &cfg.phase.scenario_lambdas {
        let scen_params = ParamVector { lambdas: lams.clone(), ..params.clone() };
        scen_params
            .validate(mcfg.n_segments(), mcfg.n_ifr_segments())
            .map_err(|e| CliError::Config(format!("phase.scenario_lambdas: {e}")))?;
        let sp = model.simulate(&scen_params).map_err(|e| CliError::stage("phase", e))?;
        let full = Trajectory::from_paths(&sp, pop, CourseLabel::Scenario).map_err(|e| CliError::stage("phase", e))?;
        let scenario = window(&full, a, b, CourseLabel::Scenario)?;
        comparisons.push(compare(&natural, &scenario)?);
        comparisons.push(compare(&actual, &scenario)?);
        courses.push((scenario, lambda_series(&scen_params, mcfg)[a - 1..b].to_vec()));
    }

    let q_full = conserved_q(&actual_full, &lambdas_actual, tau, &cfg.phase.departure).map_err(|e| CliError::stage("phase", e))?;

    let mut csv = String::from(
        "# seirfit phase; S and I as proportions of the population; v is the step length to the next day; \
         Q = S + I - log(S) / (lambda tau), dimensionless\n",
    );
    csv.push_str("course,day,date,S,I,v,Q\n");
    for (traj, lams) in &courses {
        let q = conserved_q(traj, lams, tau, &cfg.phase.departure).map_err(|e| CliError::stage("phase", e))?;
        let v = speed_series(traj);
        let label = serde_json::to_value(traj.label).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default();
        for (j, p) in traj.points.iter().enumerate() {
            let day = a + j;
            csv.push_str(&format!(
                "{label},{day},{},{},{},{},{}\n",
                fmt_date(dataset.date(day)),
                p[0],
                p[1],
                opt(v.get(j).copied()),
                q.q[j]
            ));
        }
    }

    let departure_day = q_full.departure.map(|i| i + 1);
    let summary = PhaseSummary {
        command: "phase",
        units: "l and m dimensionless; work in squared proportions; q dimensionless; days 1-based",
        model: problem.flags.label(),
        start_date: fmt_date(dataset.date(a)),
        end_date: fmt_date(dataset.date(b)),
        natural_lambda,
        tau,
        comparisons,
        q_mean: *q_full.running_mean.last().expect("non-empty trajectory"),
        q_deviation: q_full.deviation,
        departure_day,
        departure_date: departure_day.map(|d| fmt_date(dataset.date(d))),
    };
    let traj_path = cfg.output_dir.join("trajectory.csv");
    let measures = cfg.output_dir.join("measures.json");
    write_file(&traj_path, csv)?;
    write_json(&measures, &summary)?;
    Ok(vec![traj_path, measures])
}

/// `elicit-ifr`: ifr_prior.csv with one prior mean per IFR segment.
pub fn cmd_elicit_ifr(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let dataset = load(cfg)?;
    let reference = cfg
        .priors
        .reference_ifr
        .ok_or_else(|| CliError::Config("priors.reference_ifr is required for elicitation".into()))?;
    let mcfg = cfg.model_config(cfg.flags()?, cfg.likelihood()?, dataset.len())?;
    let breaks = &mcfg.ifr_breaks;
    let acm = dataset.age_matrix(reference);
    let means = seirfit_core::obs::elicit_ifr(&acm, breaks).map_err(|e| CliError::stage("elicit-ifr", e))?;
    let mut out = String::from("# seirfit elicit-ifr; prior_mean is a probability (case-weighted reference IFR)\n");
    out.push_str("segment,start_date,end_date,days,prior_mean\n");
    for (j, (w, m)) in breaks.windows(2).zip(&means).enumerate() {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            j + 1,
            fmt_date(dataset.date(w[0])),
            fmt_date(dataset.date(w[1] - 1)),
            w[1] - w[0],
            m
        ));
    }
    let mut daily = String::from("# seirfit elicit-ifr; daily_ifr is a probability\nday,date,daily_ifr\n");
    for t in 1..=dataset.len() {
        let p = daily_ifr(&acm, t).map_err(|e| CliError::stage("elicit-ifr", e))?;
        daily.push_str(&format!("{t},{},{p}\n", fmt_date(dataset.date(t))));
    }
    let path = cfg.output_dir.join("ifr_prior.csv");
    let daily_path = cfg.output_dir.join("ifr_daily.csv");
    write_file(&path, out)?;
    write_file(&daily_path, daily)?;
    Ok(vec![path, daily_path])
}

/// `smooth-proportion`: proportion.csv from recorded cases over posterior total cases.
pub fn cmd_smooth_proportion(cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    let dataset = load(cfg)?;
    let problem = Problem::new(cfg, &dataset, cfg.flags()?, cfg.likelihood()?)?;
    let draws_path = cfg.draws_path(&cfg.smoothing.draws);
    let table = read_draws(&draws_path)?;
    check_names(&problem, &table, &draws_path)?;
    let keep = cfg.smoothing.max_draws.max(1).min(table.rows.len());
    let stride = table.rows.len() as f64 / keep as f64;
    let mut totals = Vec::with_capacity(keep);
    let mut skipped = 0;
    for j in 0..keep {
        let row = &table.rows[(j as f64 * stride) as usize];
        match problem.model().simulate(&problem.params_from_constrained(row)) {
            Ok(p) => totals.push(p.cases),
            Err(_) => skipped += 1,
        }
    }
    let cases: Vec<f64> = dataset.cases.iter().map(|c| *c as f64).collect();
    let prop = observed_proportion(&cases, &totals, cfg.span).map_err(|e| CliError::stage("smooth-proportion", e))?;
    let mut out = format!(
        "# seirfit smooth-proportion; ratio of recorded to total cases; span={} draws={} excluded_pairs={} skipped_draws={skipped}\n",
        cfg.span,
        totals.len(),
        prop.excluded
    );
    out.push_str("day,date,median,smoothed\n");
    for t in 0..dataset.len() {
        let med = prop.median[t];
        out.push_str(&format!(
            "{},{},{},{}\n",
            t + 1,
            fmt_date(dataset.date(t + 1)),
            if med.is_nan() { String::new() } else { med.to_string() },
            prop.smoothed[t]
        ));
    }
    let path = cfg.output_dir.join("proportion.csv");
    write_file(&path, out)?;
    Ok(vec![path])
}
