use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use masgrad_lab::config::load_overlay;
use masgrad_lab::{resolve, run_experiment, ConfigOverlay, Experiment};

/// Run a MasGrad experiment and write CSV/SVG outputs plus a manifest.
#[derive(Debug, Parser)]
#[command(name = "masgrad-lab", version)]
struct Cli {
    /// Experiment to run; may instead come from the config file.
    #[arg(value_enum)]
    experiment: Option<Experiment>,

    /// JSON config (or a previous run's manifest.json).
    #[arg(long)]
    config: Option<PathBuf>,

    #[command(flatten)]
    overlay: ConfigOverlay,
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    let file = cli.config.as_deref().map(load_overlay).transpose()?;
    let env_seed = std::env::var("MASGRAD_SEED").ok();
    let cfg = resolve(cli.experiment, file.as_ref(), env_seed.as_deref(), &cli.overlay)?;
    let outcome = run_experiment(&cfg)?;
    for f in &outcome.files {
        println!("{}", outcome.out.join(f).display());
    }
    for e in &outcome.errors {
        eprintln!("error: {e}");
    }
    Ok(outcome.errors.is_empty())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
