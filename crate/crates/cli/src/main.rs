//! `equilens`: runs tournaments and interp experiments from config files and
//! writes their artifacts under an output directory.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Exit code 1.
    #[error("config error: {0}")]
    Config(String),
    /// Exit code 2.
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }

    pub fn runtime(e: impl std::fmt::Display) -> Self {
        CliError::Runtime(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "equilens", version, about = "Nash-distance tournaments and interpretability experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Play one match between two agents.
    Play(Common),
    /// Run every cell of a tournament plan.
    Tournament(Common),
    /// Fit linear probes on every layer of a model.
    Probe(Common),
    /// Logit lens over random prompts and the override layer.
    Lens(Common),
    /// Score opponent-tracking heads and ablate the top ones.
    Ablate(Common),
    /// Steering sweep along a cooperation direction.
    Steer(Common),
    /// Clamp sweep along a cooperation direction.
    Clamp(Common),
    /// Rebuild summary tables and plot data of a run directory.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML config, or JSON when the file ends in `.json`.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the seed in the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory. Defaults to `<root>/<command>-<seed>`, where root is
    /// $EQUILENS_OUT or `runs`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Count the fully mixed equilibrium in Nash distances.
    #[arg(long, value_name = "BOOL")]
    pub include_mixed_eq: Option<bool>,
    /// Built-in prompt template version, or a path to a template file.
    #[arg(long, default_value = equilens::engine::DEFAULT_TEMPLATE_VERSION)]
    pub template_version: String,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Run directory written by `play` or `tournament`.
    #[arg(long)]
    pub runs: PathBuf,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let jobs = match &cli.command {
        Command::Report(_) => None,
        Command::Play(c)
        | Command::Tournament(c)
        | Command::Probe(c)
        | Command::Lens(c)
        | Command::Ablate(c)
        | Command::Steer(c)
        | Command::Clamp(c) => c.jobs,
    };
    if jobs == Some(0) {
        return Err(CliError::Config("--jobs must be at least 1".into()));
    }
    if let Some(n) = jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(CliError::runtime)?;
    }
    match cli.command {
        Command::Play(c) => commands::play(&c),
        Command::Tournament(c) => commands::tournament(&c),
        Command::Probe(c) => commands::probe(&c),
        Command::Lens(c) => commands::lens(&c),
        Command::Ablate(c) => commands::ablate(&c),
        Command::Steer(c) => commands::steer(&c),
        Command::Clamp(c) => commands::clamp(&c),
        Command::Report(r) => commands::report(&r),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("equilens: {e}");
            ExitCode::from(e.code())
        }
    }
}
