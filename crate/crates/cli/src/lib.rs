//! Command line front end: configuration loading, sweeps and file output.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::RunConfig;
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "optomech",
    version,
    about = "Casimir/Coulomb optomechanics sweeps and fits"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// TOML configuration; defaults apply to every key it omits.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Override one configuration value, e.g. `--set cavity.beta_plus=0.28`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,

    /// Output directory (created if missing).
    #[arg(long, default_value = "out", global = true)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Write the full default configuration.
    Defaults,
    /// Plate–plate Casimir pressure and Lifshitz factor versus separation.
    Pressure,
    /// Casimir, Coulomb and total force and its gradient versus gap.
    Force,
    /// Reflection probability and photodetector voltage versus mirror position.
    Pdtrace,
    /// Static-equilibrium frequency ratio versus distance.
    Freqsweep,
    /// Pull-in distance and the distance of a given frequency ratio.
    Pullin,
    /// Bolometric SEO map and bifurcation lines over (distance, laser power).
    Seomap,
    /// Fit model parameters to a measured series.
    Fit,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Defaults => "defaults",
            Command::Pressure => "pressure",
            Command::Force => "force",
            Command::Pdtrace => "pdtrace",
            Command::Freqsweep => "freqsweep",
            Command::Pullin => "pullin",
            Command::Seomap => "seomap",
            Command::Fit => "fit",
        }
    }
}

/// Loads the configuration and runs one subcommand; returns the files written.
pub fn run(cli: &Cli) -> Result<Vec<PathBuf>, CliError> {
    let mut cfg = RunConfig::from_file(cli.config.as_deref(), &cli.overrides)?;
    // A relative data path is taken relative to the config file that names it
    if let (Some(config), Some(data)) = (&cli.config, &cfg.fit.data) {
        let data = std::path::Path::new(data);
        if data.is_relative() {
            let base = config.parent().unwrap_or(std::path::Path::new(""));
            cfg.fit.data = Some(base.join(data).to_string_lossy().into_owned());
        }
    }
    std::fs::create_dir_all(&cli.out).map_err(|e| CliError::io(&cli.out, e))?;
    commands::execute(cli.command, &cfg, &cli.out)
}
