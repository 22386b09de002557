use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use smoothsgd::commands;
use smoothsgd::figure3::figure3;
use smoothsgd::{Error, ExperimentConfig, Result};

#[derive(Parser)]
#[command(name = "smoothsgd", version, about = "SGD on convolved landscapes: simulation, certification, bounds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON experiment config; the built-in spiky default when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    trials: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// One trajectory, every step written to trial_0.csv.
    Run(Common),
    /// Parallel trials with per-trial CSVs, finals.csv, summary.json and a histogram.
    Ensemble(Common),
    /// Convolved landscape on the config grid: smooth.csv.
    Smooth(Common),
    /// One-point-convexity certificates on the config grid: certify.csv.
    Certify(Common),
    /// Convergence constants for the first stage.
    Bounds {
        #[command(flatten)]
        common: Common,
        /// One-point-convexity constant (defaults to the config's c_min).
        #[arg(long)]
        c: Option<f64>,
    },
    /// All three rows of the landscape figure.
    Figure3(Common),
    /// Print the default config as JSON.
    DefaultConfig,
}

fn load(common: &Common) -> Result<(ExperimentConfig, PathBuf)> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::spiky_default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(n) = common.trials {
        cfg.n_trials = n;
    }
    if let Some(out) = &common.out {
        cfg.out_dir = out.display().to_string();
    }
    cfg.validate()?;
    let out = PathBuf::from(&cfg.out_dir);
    Ok((cfg, out))
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(c) => {
            let (cfg, out) = load(&c)?;
            let (outcome, _) = commands::run(&cfg, &out)?;
            println!("steps={} final_x={:?} dist2={:?}", outcome.steps, outcome.final_x, outcome.dist2);
        }
        Command::Ensemble(c) => {
            let (cfg, out) = load(&c)?;
            let r = commands::ensemble(&cfg, &out)?;
            println!(
                "trials={} diverged={} clusters={} median_dist={:?} success_fraction={:?}",
                r.trials.len(),
                r.diverged_count,
                r.cluster_count,
                r.median_dist,
                r.success_fraction
            );
        }
        Command::Smooth(c) => {
            let (cfg, out) = load(&c)?;
            let rows = commands::smooth(&cfg, &out)?;
            println!("points={} -> {}", rows.len(), out.join("smooth.csv").display());
        }
        Command::Certify(c) => {
            let (cfg, out) = load(&c)?;
            let report = commands::certify(&cfg, &out)?;
            println!("{}", commands::certify_summary(&report));
        }
        Command::Bounds { common, c } => {
            let (cfg, _) = load(&common)?;
            let k = commands::bounds(&cfg, c)?;
            print!("{}", commands::format_bounds(&k));
            println!("{}", serde_json::to_string(&k).map_err(Error::from)?);
        }
        Command::Figure3(c) => {
            let (cfg, out) = load(&c)?;
            let s = figure3(&cfg, &out)?;
            for p in &s.row2 {
                println!("row2 r={} clusters={} median_dist={:?}", p.radius, p.cluster_count, p.median_dist);
            }
            for p in &s.row3 {
                println!("row3 eta={} r={} median_dist={:?}", p.eta, p.radius, p.median_dist);
            }
        }
        Command::DefaultConfig => println!("{}", ExperimentConfig::spiky_default().to_json()),
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
