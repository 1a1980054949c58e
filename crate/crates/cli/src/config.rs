//! Run configuration read from a single TOML file.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use seirfit_core::epi::{
    births_per_day, discretize_delay, DelayKind, DelaySpec, EpiModel, GammaDelay, Likelihood, ModelConfig,
    ModelFlags, ParamVector,
};
use seirfit_core::inference::{MetricKind, SamplerConfig};
use seirfit_core::obs::{elicit_ifr, Prior, PriorSpec};
use seirfit_core::phase::DepartureRule;
use seirfit_core::select::BridgeConfig;

use crate::dataset::{load_dataset, Dataset, FillPolicy, LoadReport, SeriesPaths};
use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub chains: usize,
    pub output_dir: PathBuf,
    /// `sir` or `seir`, optionally suffixed with `.vacc`, `.dem`, `.seirs`.
    pub model: String,
    /// `negbin`, `poisexp` or `poislognorm`.
    pub likelihood: String,
    /// Local-regression span for the observed proportion.
    pub span: f64,
    pub data: DataConfig,
    pub epidemic: EpidemicConfig,
    pub priors: PriorConfig,
    pub sampler: SamplerConfig,
    pub synthetic: SyntheticConfig,
    pub select: SelectConfig,
    pub phase: PhaseConfig,
    pub smoothing: SmoothingConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            chains: 4,
            output_dir: PathBuf::from("out"),
            model: "seir".into(),
            likelihood: "negbin".into(),
            span: 0.75,
            data: DataConfig::default(),
            epidemic: EpidemicConfig::default(),
            priors: PriorConfig::default(),
            sampler: default_sampler(),
            synthetic: SyntheticConfig::default(),
            select: SelectConfig::default(),
            phase: PhaseConfig::default(),
            smoothing: SmoothingConfig::default(),
        }
    }
}

/// Epidemic posteriors are strongly correlated, so fits start at the mode
/// and adapt a dense metric.
fn default_sampler() -> SamplerConfig {
    SamplerConfig {
        metric: MetricKind::Dense,
        optimize_init: true,
        ..SamplerConfig::default()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Canonical single-file dataset; overrides the per-series files.
    pub dataset: Option<PathBuf>,
    pub deaths: Option<PathBuf>,
    pub cases: Option<PathBuf>,
    pub cases_by_age: Option<PathBuf>,
    pub vaccinations: Option<PathBuf>,
    pub fill: FillPolicy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpidemicConfig {
    pub population: f64,
    pub infectious_period: usize,
    pub exposed_period: usize,
    pub waning_delay: usize,
    pub immunity_first: f64,
    pub immunity_second: f64,
    /// Daily births; replaced by the age-band estimate when both
    /// `youngest_group` and `group_years` are set.
    pub births_per_day: f64,
    pub youngest_group: Option<f64>,
    pub group_years: Option<f64>,
    /// Interior change-points (days); the first and last are implied.
    pub changepoints: Vec<usize>,
    /// Interior IFR break-points (days).
    pub ifr_breaks: Vec<usize>,
    pub death_delay: DelaySpec,
    /// Infection-to-recovery delay, required by the SEIRS variant.
    pub recovery_delay: Option<GammaDelay>,
}

impl Default for EpidemicConfig {
    fn default() -> Self {
        Self {
            population: 1e7,
            infectious_period: 6,
            exposed_period: 2,
            waning_delay: 84,
            immunity_first: 0.4,
            immunity_second: 0.1,
            births_per_day: 0.0,
            youngest_group: None,
            group_years: None,
            changepoints: Vec::new(),
            ifr_breaks: Vec::new(),
            death_delay: DelaySpec::infection_to_death(),
            recovery_delay: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorConfig {
    pub lambda: Prior,
    pub psi: Prior,
    pub c_init: Prior,
    pub sigma: Prior,
    /// Explicit IFR prior means; elicited from the age split when absent.
    pub ifr_means: Option<Vec<f64>>,
    pub ifr_sd: f64,
    /// Reference IFR per age group for elicitation.
    pub reference_ifr: Option<[f64; 4]>,
}

impl Default for PriorConfig {
    fn default() -> Self {
        let p = PriorSpec::new(Vec::new());
        Self {
            lambda: p.lambda,
            psi: p.psi,
            c_init: p.c_init,
            sigma: p.sigma,
            ifr_means: None,
            ifr_sd: p.ifr_sd,
            reference_ifr: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub days: usize,
    pub start_date: NaiveDate,
    pub lambdas: Vec<f64>,
    pub ifrs: Vec<f64>,
    /// `inf` gives Poisson deaths.
    pub psi: f64,
    pub c_init: f64,
    pub sigma: Option<f64>,
    /// Probability that a case is recorded.
    pub reporting: f64,
    pub age_shares: [f64; 4],
    /// Constant daily doses from `vaccination_start` onward.
    pub vaccinations_per_day: f64,
    pub vaccination_start: usize,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            days: 150,
            start_date: NaiveDate::from_ymd_opt(2020, 3, 1).expect("valid date"),
            lambdas: vec![0.9, 0.4, 0.7],
            ifrs: vec![0.01],
            psi: 10.0,
            c_init: 100.0,
            sigma: None,
            reporting: 0.3,
            age_shares: [0.35, 0.35, 0.2, 0.1],
            vaccinations_per_day: 0.0,
            vaccination_start: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectConfig {
    /// Model labels to compare; each is fitted with the run's likelihood.
    pub variants: Vec<String>,
    /// Refine the maximum log likelihood by simulated annealing.
    pub refine: bool,
    pub anneal_steps: usize,
    pub bridge: BridgeConfig,
}

impl Default for SelectConfig {
    fn default() -> Self {
        Self {
            variants: ModelFlags::table_variants().iter().map(ModelFlags::label).collect(),
            refine: true,
            anneal_steps: 20_000,
            bridge: BridgeConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhaseConfig {
    /// Draws written by `fit`; defaults to `<output_dir>/draws.csv`.
    pub draws: Option<PathBuf>,
    /// First and last day of the comparison window (1-based, inclusive).
    pub start_day: Option<usize>,
    pub end_day: Option<usize>,
    /// Rate of the natural course; defaults to the first segment's median.
    pub natural_lambda: Option<f64>,
    pub dt: f64,
    /// Segment rates for a scenario course.
    pub scenario_lambdas: Option<Vec<f64>>,
    pub departure: DepartureRule,
}

impl Default for PhaseConfig {
    fn default() -> Self {
        Self {
            draws: None,
            start_day: None,
            end_day: None,
            natural_lambda: None,
            dt: 0.01,
            scenario_lambdas: None,
            departure: DepartureRule::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmoothingConfig {
    /// Draws written by `fit`; defaults to `<output_dir>/draws.csv`.
    pub draws: Option<PathBuf>,
    /// At most this many evenly spaced draws are pushed through the model.
    pub max_draws: usize,
}

impl Default for SmoothingConfig {
    fn default() -> Self {
        Self { draws: None, max_draws: 400 }
    }
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl RunConfig {
    /// Parses TOML; a partial `[sampler]` table overrides the CLI defaults
    /// field by field.
    pub fn from_toml_str(text: &str) -> Result<Self, CliError> {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        if let Some(toml::Value::Table(user)) = table.remove("sampler") {
            let mut base =
                toml::Table::try_from(default_sampler()).map_err(|e| CliError::Config(e.to_string()))?;
            base.extend(user);
            table.insert("sampler".into(), toml::Value::Table(base));
        }
        toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(e.to_string()))
    }

    /// Reads a config file; relative paths are taken from its directory.
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        resolve(base, &mut self.output_dir);
        let d = &mut self.data;
        for p in [&mut d.dataset, &mut d.deaths, &mut d.cases, &mut d.cases_by_age, &mut d.vaccinations]
            .into_iter()
            .flatten()
        {
            resolve(base, p);
        }
        for p in [&mut self.phase.draws, &mut self.smoothing.draws].into_iter().flatten() {
            resolve(base, p);
        }
    }

    pub fn flags(&self) -> Result<ModelFlags, CliError> {
        parse_flags(&self.model)
    }

    pub fn likelihood(&self) -> Result<Likelihood, CliError> {
        Likelihood::parse(&self.likelihood)
            .ok_or_else(|| CliError::Usage(format!("unknown likelihood `{}`", self.likelihood)))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.chains == 0 {
            return Err(CliError::Config("chains must be at least 1".into()));
        }
        self.flags()?;
        self.likelihood()?;
        self.sampler.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if !(self.span > 0.0 && self.span.is_finite()) {
            return Err(CliError::Config(format!("span {} must be positive", self.span)));
        }
        Ok(())
    }

    pub fn ensure_output_dir(&self) -> Result<(), CliError> {
        fs::create_dir_all(&self.output_dir).map_err(|e| CliError::io(&self.output_dir, e))
    }

    pub fn load_dataset(&self) -> Result<(Dataset, LoadReport), CliError> {
        if let Some(p) = &self.data.dataset {
            return Dataset::read_csv(p, self.data.fill);
        }
        let d = &self.data;
        for p in [&d.deaths, &d.cases, &d.cases_by_age, &d.vaccinations].into_iter().flatten() {
            if !p.is_file() {
                return Err(CliError::Config(format!("data file {} does not exist", p.display())));
            }
        }
        let paths = SeriesPaths {
            deaths: d.deaths.clone(),
            cases: d.cases.clone(),
            cases_by_age: d.cases_by_age.clone(),
            vaccinations: d.vaccinations.clone(),
        };
        load_dataset(&paths, d.fill)
    }

    pub fn model_config(&self, flags: ModelFlags, likelihood: Likelihood, n: usize) -> Result<ModelConfig, CliError> {
        let e = &self.epidemic;
        let mut cfg = ModelConfig::new(n, e.population);
        cfg.flags = flags;
        cfg.likelihood = likelihood;
        cfg.infectious_period = e.infectious_period;
        cfg.exposed_period = e.exposed_period;
        cfg.waning_delay = e.waning_delay;
        cfg.immunity_first = e.immunity_first;
        cfg.immunity_second = e.immunity_second;
        cfg.births_per_day = match (e.youngest_group, e.group_years) {
            (Some(a1), Some(g1)) => births_per_day(a1, g1).map_err(|e| CliError::Config(e.to_string()))?,
            _ => e.births_per_day,
        };
        let mut cfg = cfg.with_interior_changepoints(&e.changepoints);
        let mut breaks = vec![1];
        breaks.extend_from_slice(&e.ifr_breaks);
        breaks.push(n + 1);
        cfg.ifr_breaks = breaks;
        cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn build_model(
        &self,
        flags: ModelFlags,
        likelihood: Likelihood,
        vaccinations: Vec<f64>,
    ) -> Result<EpiModel, CliError> {
        let n = vaccinations.len();
        let cfg = self.model_config(flags, likelihood, n)?;
        let death = discretize_delay(&self.epidemic.death_delay, DelayKind::InfectionToDeath, n)
            .map_err(|e| CliError::Config(e.to_string()))?;
        let recovery = match (&self.epidemic.recovery_delay, flags.seirs) {
            (Some(g), true) => Some(
                discretize_delay(&DelaySpec::gamma(g.shape, g.rate), DelayKind::InfectionToRecovery, n)
                    .map_err(|e| CliError::Config(e.to_string()))?,
            ),
            (None, true) => {
                return Err(CliError::Config(
                    "the SEIRS variant needs epidemic.recovery_delay = { shape, rate }".into(),
                ))
            }
            _ => None,
        };
        EpiModel::new(cfg, death, recovery, vaccinations).map_err(|e| CliError::Config(e.to_string()))
    }

    /// IFR prior means from the config, or elicited from the age split.
    pub fn ifr_means(&self, dataset: &Dataset, ifr_breaks: &[usize]) -> Result<Vec<f64>, CliError> {
        if let Some(m) = &self.priors.ifr_means {
            if m.len() + 1 != ifr_breaks.len() {
                return Err(CliError::Config(format!(
                    "{} IFR prior means for {} IFR segments",
                    m.len(),
                    ifr_breaks.len() - 1
                )));
            }
            return Ok(m.clone());
        }
        let reference = self.priors.reference_ifr.ok_or_else(|| {
            CliError::Config("set priors.ifr_means or priors.reference_ifr for elicitation".into())
        })?;
        elicit_ifr(&dataset.age_matrix(reference), ifr_breaks).map_err(|e| CliError::stage("elicit-ifr", e))
    }

    pub fn prior_spec(&self, dataset: &Dataset, ifr_breaks: &[usize]) -> Result<PriorSpec, CliError> {
        let p = &self.priors;
        let spec = PriorSpec {
            lambda: p.lambda,
            psi: p.psi,
            c_init: p.c_init,
            sigma: p.sigma,
            ifr_means: self.ifr_means(dataset, ifr_breaks)?,
            ifr_sd: p.ifr_sd,
        };
        spec.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(spec)
    }

    pub fn synthetic_truth(&self) -> ParamVector {
        let s = &self.synthetic;
        ParamVector {
            lambdas: s.lambdas.clone(),
            ifrs: s.ifrs.clone(),
            psi: s.psi,
            c_init: s.c_init,
            sigma: s.sigma,
        }
    }

    pub fn draws_path(&self, explicit: &Option<PathBuf>) -> PathBuf {
        explicit.clone().unwrap_or_else(|| self.output_dir.join("draws.csv"))
    }
}

pub fn parse_flags(label: &str) -> Result<ModelFlags, CliError> {
    ModelFlags::parse(label).ok_or_else(|| {
        CliError::Usage(format!("unknown model `{label}`; expected sir|seir[.vacc][.dem][.seirs]"))
    })
}
