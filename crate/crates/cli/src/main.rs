//! `cidlab`: runs the dispersion research pipeline from one config file.

mod bundle;
mod config;
mod context;
mod stages;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::RunConfig;

#[derive(Debug)]
pub enum CliError {
    /// Bad or inconsistent input data, or a failing computation on it.
    Data(String),
    /// Schema or validation failure in the run configuration.
    Config(String),
    Internal(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Data(_) => 1,
            CliError::Config(_) => 2,
            CliError::Internal(_) => 3,
        }
    }

    pub fn in_stage(self, stage: &str) -> Self {
        match self {
            CliError::Data(m) => CliError::Data(format!("stage `{stage}`: {m}")),
            CliError::Internal(m) => CliError::Internal(format!("stage `{stage}`: {m}")),
            c => c,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Internal(m) => write!(f, "internal error: {m}"),
        }
    }
}

impl From<cidlab_core::Error> for CliError {
    fn from(e: cidlab_core::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "cidlab", version, about = "Cross-industry return dispersion research pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (overrides the config's `out_dir`).
    #[arg(long, global = true, env = "CIDLAB_OUT")]
    out: Option<PathBuf>,

    /// Worker threads for stage-internal parallelism.
    #[arg(long, global = true, env = "CIDLAB_THREADS")]
    threads: Option<usize>,

    /// Recompute stages even when the digest cache is current.
    #[arg(long, global = true)]
    force: bool,

    /// Seed for `synth` (overrides `synth.seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
enum Command {
    /// Load and validate every configured input.
    IngestCheck,
    /// CID, WID and CSD series plus CID innovations.
    Dispersion,
    /// Rolling betas on CID innovations.
    Betas,
    /// Quantile portfolios, long-short and characteristics.
    Sort,
    /// Factor-model alphas and loadings.
    Alphas,
    /// Fama-MacBeth regressions.
    Fmb,
    /// Spanning tests between dispersion factors.
    Spanning,
    /// Unemployment predictive regressions.
    PredictMacro,
    /// Industry employment panel regressions.
    PredictEmployment,
    /// Long-short summary under several industry classifications.
    SweepClassification,
    /// Write a synthetic economy and a matching config.
    Synth,
    /// Every analysis stage in order.
    All,
}

impl Command {
    fn stage(self) -> Option<stages::Stage> {
        use stages::Stage;
        Some(match self {
            Command::IngestCheck => Stage::IngestCheck,
            Command::Dispersion => Stage::Dispersion,
            Command::Betas => Stage::Betas,
            Command::Sort => Stage::Sort,
            Command::Alphas => Stage::Alphas,
            Command::Fmb => Stage::Fmb,
            Command::Spanning => Stage::Spanning,
            Command::PredictMacro => Stage::PredictMacro,
            Command::PredictEmployment => Stage::PredictEmployment,
            Command::SweepClassification => Stage::Sweep,
            Command::Synth => Stage::Synth,
            Command::All => return None,
        })
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (raw, mut cfg) = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None if cli.command == Command::Synth => (RunConfig::default(), RunConfig::default()),
        None => return Err(CliError::Config("--config is required for this subcommand".into())),
    };
    if let Some(seed) = cli.seed {
        cfg.synth.seed = seed;
    }
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.out_dir.clone())
        .ok_or_else(|| CliError::Config("out_dir: no output directory (use --out, CIDLAB_OUT or out_dir)".into()))?;
    let threads = cli.threads.or(cfg.threads).unwrap_or(0);
    if threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Internal(format!("thread pool: {e}")))?;
    }
    std::fs::create_dir_all(&out).map_err(|e| CliError::Data(format!("{}: {e}", out.display())))?;

    let mut bundle = bundle::Bundle::open(&out, &raw, &cfg, cli.force)?;
    let ctx = context::Context::new(&cfg);
    match cli.command.stage() {
        Some(stage) => stages::run_stage(stage, &ctx, &mut bundle, true)?,
        None => {
            for stage in stages::Stage::ANALYSIS {
                stages::run_stage(stage, &ctx, &mut bundle, false)?;
            }
        }
    }
    bundle.finish()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = std::panic::catch_unwind(|| run(cli));
    match outcome {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("cidlab: {e}");
            ExitCode::from(e.code())
        }
        Err(_) => {
            eprintln!("cidlab: internal error: unexpected panic");
            ExitCode::from(3)
        }
    }
}
