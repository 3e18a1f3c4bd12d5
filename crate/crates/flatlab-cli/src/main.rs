//! flatlab command-line front end.
//!
//! One declarative JSON config per run; deterministic outputs; exit codes
//! distinguish validation failures (2), budget refusals (3) and violated
//! quantitative properties (4).

mod commands;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use flatlab::error::{Error, ErrorClass};

#[derive(Parser)]
#[command(name = "flatlab", version, about = "Multiscale laboratory for dyadic measures")]
struct Cli {
    /// Path to the JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory for reports and measure files.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,

    /// Worker threads (falls back to FLATLAB_THREADS, then all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Serialize measure weights as exact decimal strings.
    #[arg(long, global = true)]
    exact: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Construct a measure (builtin, inline IFS, or file) and write it out.
    Generate,
    /// Scan a measure for (D, beta, U)-uniform perfectness.
    Scan,
    /// Tabulate Riesz energies of self-convolution powers.
    Energy,
    /// Tabulate L^p ball averages of the Fourier transform.
    Fourier,
    /// Convolve two measures (optionally raising to a power).
    Convolve,
    /// Extract uniform subsets from a cell set.
    Uniformize,
    /// Run a named experiment (capture counting, sumset growth, ...).
    Experiment,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    configure_threads(cli.threads);
    match run(&cli) {
        Ok(outcome) => {
            if outcome.property_failures.is_empty() {
                ExitCode::SUCCESS
            } else {
                for failure in &outcome.property_failures {
                    eprintln!("property violation: {failure}");
                }
                ExitCode::from(4)
            }
        }
        Err(err) => {
            eprintln!("error: {err}");
            match err.class() {
                ErrorClass::Validation => ExitCode::from(2),
                ErrorClass::Budget => ExitCode::from(3),
                ErrorClass::PropertyViolation => ExitCode::from(4),
            }
        }
    }
}

fn configure_threads(cli_threads: Option<usize>) {
    #[cfg(feature = "parallel")]
    {
        let n = cli_threads.or_else(|| {
            std::env::var("FLATLAB_THREADS")
                .ok()
                .and_then(|s| s.parse().ok())
        });
        if let Some(n) = n {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = cli_threads;
    }
}

fn run(cli: &Cli) -> flatlab::Result<commands::RunOutcome> {
    let config_path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("--config PATH is required".into()))?
        .display()
        .to_string();
    let out = cli.out.as_path();
    match cli.command {
        Command::Generate => {
            let config: config::GenerateConfig = config::parse_config(&config_path)?;
            commands::cmd_generate(&config, out, cli.exact)
        }
        Command::Scan => {
            let config: config::ScanConfig = config::parse_config(&config_path)?;
            commands::cmd_scan(&config, out)
        }
        Command::Energy => {
            let config: config::EnergyConfig = config::parse_config(&config_path)?;
            commands::cmd_energy(&config, out)
        }
        Command::Fourier => {
            let config: config::FourierConfig = config::parse_config(&config_path)?;
            commands::cmd_fourier(&config, out)
        }
        Command::Convolve => {
            let config: config::ConvolveConfig = config::parse_config(&config_path)?;
            commands::cmd_convolve(&config, out, cli.exact)
        }
        Command::Uniformize => {
            let config: config::UniformizeConfig = config::parse_config(&config_path)?;
            commands::cmd_uniformize(&config, out)
        }
        Command::Experiment => {
            let config: config::ExperimentConfig = config::parse_config(&config_path)?;
            commands::cmd_experiment(&config, out)
        }
    }
}
