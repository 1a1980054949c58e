//! `seirfit`: command-line pipeline around `seirfit-core`.

pub mod config;
pub mod dataset;
pub mod error;
pub mod pipeline;
pub mod synth;

use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::RunConfig;
pub use dataset::{load_dataset, Dataset, FillPolicy, LoadReport, SeriesPaths};
pub use error::CliError;
pub use synth::{generate_synthetic, TruthRecord};

#[derive(Debug, Parser)]
#[command(name = "seirfit", version, about = "Fit, compare and analyse SEIR(S) models on daily deaths")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub chains: Option<usize>,
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,
    /// sir|seir[.vacc][.dem][.seirs]
    #[arg(long, global = true)]
    pub model: Option<String>,
    /// negbin|poisexp|poislognorm
    #[arg(long, global = true)]
    pub likelihood: Option<String>,
    /// Local-regression span.
    #[arg(long, global = true)]
    pub span: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Sample the posterior: draws.csv, summary.json.
    Fit,
    /// Draw a synthetic dataset: dataset.csv, truth.json.
    Simulate,
    /// Score model variants: scores.csv.
    Select,
    /// Phase-plane analysis of a fit: trajectory.csv, measures.json.
    Phase,
    /// IFR prior means from the age split: ifr_prior.csv, ifr_daily.csv.
    ElicitIfr,
    /// Observed proportion of cases: proportion.csv.
    SmoothProportion,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Fit => "fit",
            Command::Simulate => "simulate",
            Command::Select => "select",
            Command::Phase => "phase",
            Command::ElicitIfr => "elicit-ifr",
            Command::SmoothProportion => "smooth-proportion",
        }
    }
}

impl Cli {
    /// The config file (or defaults) with command-line overrides applied.
    pub fn run_config(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::from_file(p)?,
            None => RunConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(c) = self.chains {
            cfg.chains = c;
        }
        if let Some(d) = &self.output_dir {
            cfg.output_dir = d.clone();
        }
        if let Some(m) = &self.model {
            cfg.model = m.clone();
        }
        if let Some(l) = &self.likelihood {
            cfg.likelihood = l.clone();
        }
        if let Some(s) = self.span {
            cfg.span = s;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Runs one command. On failure a `FAILED` marker naming the command and the
/// error is left in the output directory next to any partial artifacts.
pub fn run(command: Command, cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
    cfg.ensure_output_dir()?;
    let marker = cfg.output_dir.join("FAILED");
    let result = match command {
        Command::Fit => pipeline::cmd_fit(cfg),
        Command::Simulate => pipeline::cmd_simulate(cfg),
        Command::Select => pipeline::cmd_select(cfg),
        Command::Phase => pipeline::cmd_phase(cfg),
        Command::ElicitIfr => pipeline::cmd_elicit_ifr(cfg),
        Command::SmoothProportion => pipeline::cmd_smooth_proportion(cfg),
    };
    match &result {
        Ok(_) if marker.exists() => fs::remove_file(&marker).map_err(|e| CliError::io(&marker, e))?,
        Ok(_) => {}
        Err(e) => {
            let _ = fs::write(&marker, format!("seirfit {}: {e}\n", command.name()));
        }
    }
    result
}

/// Parses arguments and runs; returns the process exit code
/// (0 success, 1 failure, 2 usage).
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let outcome = cli.run_config().and_then(|cfg| run(cli.command, &cfg));
    match outcome {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
