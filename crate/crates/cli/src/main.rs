//! Experiment driver: every subcommand is a pure function of its config
//! file and seed, so reruns reproduce outputs byte for byte (the manifest's
//! wall-clock fields aside).

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::RunConfig;

#[derive(Parser)]
#[command(name = "koopman", version, about = "Koopman modeling and control experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate an environment and write train/test dataset files.
    GenData(CommonArgs),
    /// Train a model on a dataset and write a checkpoint.
    Train(CommonArgs),
    /// Score a model on held-out sequences at several horizons.
    Eval(CommonArgs),
    /// Closed-loop receding-horizon control run.
    Mpc(CommonArgs),
    /// Closed-loop proportional-feedback run.
    Pctl(CommonArgs),
    /// Merge metrics and run logs into plot-ready tables.
    Report(CommonArgs),
}

#[derive(clap::Args)]
struct CommonArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, args) = match &cli.command {
        Command::GenData(a) => ("gen-data", a),
        Command::Train(a) => ("train", a),
        Command::Eval(a) => ("eval", a),
        Command::Mpc(a) => ("mpc", a),
        Command::Pctl(a) => ("pctl", a),
        Command::Report(a) => ("report", a),
    };
    match dispatch(name, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(name: &str, args: &CommonArgs) -> Result<(), String> {
    let mut config = RunConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    // The hash covers the effective configuration, including seed override.
    let effective =
        serde_json::to_vec_pretty(&config).map_err(|e| format!("config echo failed: {e}"))?;
    match name {
        "gen-data" => commands::gen_data::run(&config, &effective, &args.out),
        "train" => commands::train::run(&config, &effective, &args.out),
        "eval" => commands::eval::run(&config, &effective, &args.out),
        "mpc" => commands::control_runs::run_mpc(&config, &effective, &args.out),
        "pctl" => commands::control_runs::run_pctl(&config, &effective, &args.out),
        "report" => commands::report::run(&config, &effective, &args.out),
        _ => unreachable!("clap enumerated the commands"),
    }
}
