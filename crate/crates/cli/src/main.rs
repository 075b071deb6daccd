use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use fourwell_cli::{config, exit_code, plot, run_to_dir, sweep};

#[derive(Parser)]
#[command(name = "fourwell", version, about = "Feedback-controlled four-well Bose-Hubbard runs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Prepare the initial state, integrate, and write the outputs.
    Run {
        config: PathBuf,
        #[arg(short, long, default_value = "out")]
        output: PathBuf,
        /// Overrides the seed of the config file.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Write a plotting script for a finished run directory.
    Plot { dir: PathBuf },
    /// Run a parameter over a list of values and a seed ensemble.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        values: Vec<String>,
        #[arg(long, default_value_t = 1)]
        seeds: u64,
        /// First seed of the ensemble; defaults to the config seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(short, long, default_value = "sweep")]
        output: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match dispatch(Cli::parse().command) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(command: Command) -> Result<i32> {
    match command {
        Command::Run { config: path, output, seed } => {
            let mut config = config::load(&path)?;
            if let Some(seed) = seed {
                config.seed = seed;
            }
            let record = run_to_dir(&config, &output)?;
            let t = record.termination.time().map_or(String::new(), |t| format!(" at t = {t}"));
            log::info!("{}{t}, {} samples, written to {}", record.termination.label(), record.samples.len(), output.display());
            Ok(exit_code(&record.termination))
        }
        Command::Plot { dir } => {
            let path = plot::write(&dir)?;
            log::info!("wrote {}", path.display());
            Ok(0)
        }
        Command::Sweep { config: path, param, values, seeds, seed, output } => {
            let mut config = config::load(&path)?;
            if let Some(seed) = seed {
                config.seed = seed;
            }
            let rows = sweep::sweep(&config, &param, &values, seeds, &output)?;
            let errors = rows.iter().filter(|r| r.status == "error").count();
            log::info!("{} runs, {errors} errors, report in {}", rows.len(), output.join(sweep::AGGREGATE_FILE).display());
            Ok(0)
        }
    }
}
