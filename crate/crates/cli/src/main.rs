use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sgemas_cli::{ablate, detect, evaluate, simulate, Overrides, RunConfig};
use sgemas_core::Variant;

#[derive(Parser)]
#[command(name = "sgemas", version, about = "Metabolic anomaly detection on streaming signals")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
}

#[derive(clap::Args)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override every seed in the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the engine variant (v3_0 .. v3_3).
    #[arg(long)]
    variant: Option<Variant>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the engine on a synthetic stream and write its trace.
    Simulate(Common),
    /// Score a CSV recording per sample or per beat.
    Detect(Common),
    /// AUC and ROC points for the engine (and optionally the leaky baseline).
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Evaluate an existing scores file from `detect` instead of running.
        #[arg(long)]
        scores: Option<PathBuf>,
    },
    /// Sweep variants over several labeled streams.
    Ablate(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).init();

    let (common, scores) = match &cli.command {
        Command::Simulate(c) | Command::Detect(c) | Command::Ablate(c) => (c, None),
        Command::Evaluate { common, scores } => (common, scores.clone()),
    };
    let overrides = Overrides {
        seed: common.seed,
        out: common.out.clone(),
        variant: common.variant,
        scores,
    };
    let result = RunConfig::load(&common.config, &overrides).and_then(|cfg| match cli.command {
        Command::Simulate(_) => simulate(&cfg),
        Command::Detect(_) => detect(&cfg),
        Command::Evaluate { .. } => evaluate(&cfg),
        Command::Ablate(_) => ablate(&cfg),
    });
    match result {
        Ok(outcome) => {
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            println!("{}", outcome.summary);
            for f in &outcome.files {
                log::info!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
