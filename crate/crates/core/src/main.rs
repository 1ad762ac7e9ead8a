use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use wmqt::experiment::{exit_code, parse_config, run_experiment_with, Mode, RunOptions};

#[derive(Debug, Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum CliMode {
    Evolve,
    Sweep,
    Ramp,
    RelaxAfterMeasurement,
    PmlCheck,
}

impl From<CliMode> for Mode {
    fn from(m: CliMode) -> Self {
        match m {
            CliMode::Evolve => Mode::Evolve,
            CliMode::Sweep => Mode::Sweep,
            CliMode::Ramp => Mode::Ramp,
            CliMode::RelaxAfterMeasurement => Mode::RelaxAfterMeasurement,
            CliMode::PmlCheck => Mode::PmlCheck,
        }
    }
}

/// Tunneling escape from the tilted washboard potential.
#[derive(Debug, Parser)]
#[command(name = "wmqt", version)]
struct Cli {
    mode: CliMode,
    /// `key = value` configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Worker threads for independent runs (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory, overriding `output_dir` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let text = match std::fs::read_to_string(&cli.config) {
        Ok(t) => t,
        Err(e) => {
            log::error!("cannot read {}: {e}", cli.config.display());
            return ExitCode::from(2);
        }
    };
    let opts = RunOptions {
        threads: cli.threads,
        output_dir: cli.out,
    };
    let result = parse_config(&text, Some(cli.mode.into())).and_then(|cfg| run_experiment_with(&cfg, &opts));
    match result {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
