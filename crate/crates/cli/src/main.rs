//! `ecokin`: command-line front end for the population-dynamics toolkit.
//!
//! Exit codes are part of the interface: 0 on success, 1 when the domain
//! says no (a condition fails, an iteration does not converge, an identity
//! family fails), 2 for configuration or usage mistakes.

mod commands;
mod config;
mod provenance;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::commands::Ctx;
use crate::config::{load_config, RunConfig};
use crate::provenance::fnv1a64;

#[derive(Debug)]
pub enum CliError {
    /// Bad configuration or usage; exit code 2.
    Config(String),
    /// The run itself failed or a checked property does not hold; exit 1.
    Domain(String),
}

#[derive(Parser)]
#[command(
    name = "ecokin",
    version,
    about = "Spatial birth-death population models: condition checks, exact \
             simulation, kinetic solves, scaling studies, and identity verification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the mortality-threshold and fixed-point conditions
    Check(CommonArgs),
    /// Run the exact stochastic simulator over replicas
    Simulate(CommonArgs),
    /// Integrate the kinetic density equation
    Solve(CommonArgs),
    /// Compare scaled simulations against the kinetic solution
    #[command(name = "limit-study")]
    LimitStudy(CommonArgs),
    /// Cross-check the combinatorial identities against oracles
    Verify(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// TOML configuration file
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Override one config key, e.g. --set model.mortality=2.0 (repeatable)
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,

    /// Output directory (overrides output.directory)
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Override the seed used by stochastic commands
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Domain(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let (name, args) = match &cli.command {
        Command::Check(a) => ("check", a),
        Command::Simulate(a) => ("simulate", a),
        Command::Solve(a) => ("solve", a),
        Command::LimitStudy(a) => ("limit-study", a),
        Command::Verify(a) => ("verify", a),
    };

    let (config, canonical) = match &args.config {
        Some(path) => load_config(path, &args.set)?,
        None if name == "verify" => {
            // verify runs self-contained with built-in defaults
            if !args.set.is_empty() {
                return Err(CliError::Config(
                    "--set needs --config; verify without a config uses defaults".into(),
                ));
            }
            (empty_config(), String::new())
        }
        None => {
            return Err(CliError::Config(format!(
                "{name} needs --config PATH"
            )))
        }
    };

    let out_dir = args
        .out
        .clone()
        .or_else(|| {
            config
                .output
                .as_ref()
                .and_then(|o| o.directory.as_ref())
                .map(PathBuf::from)
        })
        .unwrap_or_else(|| PathBuf::from("ecokin-out"));
    std::fs::create_dir_all(&out_dir).map_err(|e| {
        CliError::Config(format!("cannot create output directory {}: {e}", out_dir.display()))
    })?;

    let ctx = Ctx {
        command_line: std::env::args().collect::<Vec<_>>().join(" "),
        config_hash: fnv1a64(canonical.as_bytes()),
        out_dir,
        seed_override: args.seed,
    };

    match cli.command {
        Command::Check(_) => commands::cmd_check(&config, &ctx),
        Command::Simulate(_) => commands::cmd_simulate(&config, &ctx),
        Command::Solve(_) => commands::cmd_solve(&config, &ctx),
        Command::LimitStudy(_) => commands::cmd_limit_study(&config, &ctx),
        Command::Verify(_) => commands::cmd_verify(&config, &ctx),
    }
}

fn empty_config() -> RunConfig {
    RunConfig {
        model: None,
        domain: None,
        ibm: None,
        kinetics: None,
        checks: None,
        limit: None,
        verify: None,
        output: None,
    }
}
