use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use vibrancy::pipeline::{self, Command, Overrides, RunConfig};

#[derive(Parser)]
#[command(name = "vibrancy", version, about = "Community vibrancy and crime analysis pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Significance level for trend classification.
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// Matching caliper in standard deviations of the matching score.
    #[arg(long, global = true)]
    caliper: Option<f64>,
    /// Worker threads for models and experiments.
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Generate a synthetic input bundle under <out>/input.
    Synth,
    /// Parse inputs and assign events to block groups.
    Ingest,
    /// Per-block-group measures, series and correlations.
    Measures,
    /// Yearly trend classification.
    Trends,
    /// Crime and trend regression models.
    Regress,
    /// Propensity-matched experiments.
    Match,
    /// Bundle reports and map data.
    Report,
    /// Every step in order (starting with synth when no inputs are configured).
    All,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Synth => Command::Synth,
            Cmd::Ingest => Command::Ingest,
            Cmd::Measures => Command::Measures,
            Cmd::Trends => Command::Trends,
            Cmd::Regress => Command::Regress,
            Cmd::Match => Command::Match,
            Cmd::Report => Command::Report,
            Cmd::All => Command::All,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut cfg = match &cli.config {
        Some(p) => match RunConfig::load(p) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(e.exit_code() as u8);
            }
        },
        None => RunConfig::default(),
    };
    cfg.apply(&Overrides { out: cli.out.clone(), seed: cli.seed, alpha: cli.alpha, caliper: cli.caliper });

    if let Some(n) = cli.jobs {
        if let Err(e) = rayon_pool(n) {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match pipeline::run(&cfg, cli.command.into()) {
        Ok(log) => {
            for line in log {
                eprintln!("{line}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn rayon_pool(n: usize) -> Result<(), String> {
    if n == 0 {
        return Err("--jobs must be at least 1".into());
    }
    vibrancy::set_threads(n).map_err(|e| e.to_string())
}
