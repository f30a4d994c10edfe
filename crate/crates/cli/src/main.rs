use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pasdf::PasdfError;
use pasdf_cli::{exit_code, RunConfig};

#[derive(Parser)]
#[command(name = "pasdf", version, about = "Pose-aligned SDF anomaly detection and repair for point clouds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Canonical training id (overrides the config).
    #[arg(long, global = true)]
    canonical: Option<String>,
    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Align training inputs, sample and label SDF queries.
    Prepare,
    /// Train the SDF model on prepared samples.
    Train,
    /// Score test clouds and write score maps.
    Detect,
    /// Rebuild test clouds from the learned surface.
    Repair,
    /// Recompute AUROCs from detection outputs.
    Eval,
    /// Run the synthetic benchmark end to end.
    Bench,
    /// Print the effective configuration.
    Config,
}

fn load_config(cli: &Cli) -> Result<RunConfig, PasdfError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(id) = &cli.canonical {
        cfg.canonical = Some(id.clone());
    }
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<(), PasdfError> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn run(cli: &Cli) -> Result<(), PasdfError> {
    let cfg = load_config(cli)?;
    match cli.command {
        Command::Prepare => print_json(&pasdf_cli::cmd_prepare(&cfg)?),
        Command::Train => print_json(&pasdf_cli::cmd_train(&cfg)?),
        Command::Detect => print_json(&pasdf_cli::cmd_detect(&cfg)?),
        Command::Repair => print_json(&pasdf_cli::cmd_repair(&cfg)?),
        Command::Eval => print_json(&pasdf_cli::cmd_eval(&cfg)?),
        Command::Bench => {
            print!("{}", pasdf_cli::cmd_bench(&cfg)?.table());
            Ok(())
        }
        Command::Config => {
            print!("{}", cfg.to_json());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Some(n) = std::env::var("PASDF_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            log::warn!("PASDF_THREADS ignored: {e}");
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
