use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sha2::{Digest, Sha256};

use sgns::config::ExperimentConfig;
use sgns::error::CliError;
use sgns::experiments::run_experiment;
use sgns::registry::REGISTRY;

#[derive(Parser)]
#[command(name = "sgns", about = "Spectral Galerkin stochastic Navier-Stokes diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment from a TOML config file.
    Run { config: PathBuf },
    /// List the registered experiments with their anchors.
    List,
    /// Validate a config file without running anything.
    Validate { config: PathBuf },
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::List => {
            for e in REGISTRY {
                println!(
                    "{:<22} [{}] ({}) {}",
                    e.name,
                    e.anchor,
                    e.runtime.as_str(),
                    e.summary
                );
            }
            Ok(())
        }
        Command::Validate { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            println!("OK {} -> {}", cfg.experiment, cfg.output_dir.display());
            Ok(())
        }
        Command::Run { config } => {
            let text = std::fs::read_to_string(&config)
                .map_err(|e| CliError::Config(format!("{}: {e}", config.display())))?;
            let hash = hex::encode(Sha256::digest(text.as_bytes()));
            let cfg = ExperimentConfig::load(&config)?;
            let report = run_experiment(&cfg, &hash)?;
            for c in &report.checks {
                println!(
                    "CHECK {} [{}]: {}  ({})",
                    c.name,
                    c.anchor,
                    if c.pass { "PASS" } else { "FAIL" },
                    c.detail
                );
            }
            println!(
                "EXPERIMENT {} [{}]: {}",
                report.experiment,
                report.anchor,
                if report.pass { "PASS" } else { "FAIL" }
            );
            if report.pass {
                Ok(())
            } else {
                let failed: Vec<&str> = report
                    .checks
                    .iter()
                    .filter(|c| !c.pass)
                    .map(|c| c.name.as_str())
                    .collect();
                Err(CliError::CheckFailed(failed.join(", ")))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
