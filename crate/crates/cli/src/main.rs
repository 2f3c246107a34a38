use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;

use config::Settings;

/// Simulate and calibrate the aggregated spatial SIR model and its
/// metapopulation reference model.
#[derive(Debug, Parser)]
#[command(name = "psir", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate a model and write its trajectory
    Simulate {
        /// JSON run configuration
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        settings: Settings,
    },
    /// Fit the aggregated model to an observed case series
    Fit {
        /// JSON run configuration
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        settings: Settings,
    },
    /// Print the basic reproduction number
    R0 {
        /// JSON run configuration
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        settings: Settings,
    },
}

#[derive(Debug)]
pub enum CliError {
    /// Bad configuration or input data.
    Invalid(String),
    /// The numerics failed on a valid configuration.
    Numeric(String),
    /// The fit ran but did not converge; its outputs were still written.
    NotConverged,
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Invalid(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::NotConverged => 4,
        }
    }
}

impl From<psir::Error> for CliError {
    fn from(e: psir::Error) -> Self {
        match e {
            psir::Error::Numeric(_) => CliError::Numeric(e.to_string()),
            _ => CliError::Invalid(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate { config, settings } => {
            Settings::resolve(config.as_deref(), settings).and_then(|s| commands::simulate(&s))
        }
        Command::Fit { config, settings } => {
            Settings::resolve(config.as_deref(), settings).and_then(|s| commands::fit(&s))
        }
        Command::R0 { config, settings } => {
            Settings::resolve(config.as_deref(), settings).and_then(|s| commands::r0(&s))
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match &e {
                CliError::Invalid(msg) => eprintln!("error: {msg}"),
                CliError::Numeric(msg) => eprintln!("numeric failure: {msg}"),
                CliError::NotConverged => {
                    eprintln!("warning: fit did not converge; best result written")
                }
            }
            ExitCode::from(e.exit_code())
        }
    }
}
