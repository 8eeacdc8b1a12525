//! `linekit` command-line front end.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 configuration error,
//! 3 infeasible problem, 4 numerical degeneracy.

mod commands;
mod config;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde_json::json;

use crate::commands::Report;
use crate::config::ConfigError;

#[derive(Parser, Debug)]
#[command(name = "linekit", version, about = "Line length design and analysis for multiline TRL calibration kits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON job configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = "linekit-out")]
    out: PathBuf,
    /// Random seed, overriding the config (design-optimize, linecount, mc-sens).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Effective phase, eigenvalue and normalized eigenvalue of a line set.
    Analyze,
    /// Line lengths by constrained differential evolution.
    DesignOptimize,
    /// Line lengths from a sparse ruler (Golomb, Wichmann or perfect).
    DesignRuler,
    /// Recommended number of lines for a band and longest line.
    Linecount,
    /// Classical two-line TRL band and length.
    TrlBand,
    /// Monte Carlo sensitivity of the normalized error terms.
    ///
    /// Geometry tolerances are modelled as a shared ε′/ε″ perturbation per
    /// trial, together with length perturbations and T-matrix noise.
    McSens,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Analyze => "analyze",
            Command::DesignOptimize => "design-optimize",
            Command::DesignRuler => "design-ruler",
            Command::Linecount => "linecount",
            Command::TrlBand => "trl-band",
            Command::McSens => "mc-sens",
        }
    }

    fn takes_seed(self) -> bool {
        matches!(self, Command::DesignOptimize | Command::Linecount | Command::McSens)
    }
}

fn run(cli: &Cli) -> anyhow::Result<Report> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| ConfigError("--config <path> is required".into()))?;
    if cli.seed.is_some() && !cli.command.takes_seed() {
        eprintln!("note: --seed has no effect on {}", cli.command.name());
    }
    let out: &Path = &cli.out;
    match cli.command {
        Command::Analyze => commands::analyze(config::load(path)?, out),
        Command::DesignOptimize => {
            let mut c: config::DesignOptimizeConfig = config::load(path)?;
            if let Some(s) = cli.seed {
                c.optimizer.seed = s;
            }
            commands::design_optimize(c, out)
        }
        Command::DesignRuler => commands::design_ruler(config::load(path)?, out),
        Command::Linecount => {
            let mut c: config::LinecountConfig = config::load(path)?;
            if let Some(s) = cli.seed {
                c.optimizer.seed = s;
            }
            commands::linecount(c, out)
        }
        Command::TrlBand => commands::trl_band(config::load(path)?, out),
        Command::McSens => {
            let mut c: config::McSensConfig = config::load(path)?;
            if let Some(s) = cli.seed {
                c.mc.seed = s;
            }
            commands::mc_sens(c, out)
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<ConfigError>().is_some() {
        return 2;
    }
    match e.downcast_ref::<linekit::Error>() {
        Some(linekit::Error::Infeasible(_)) => 3,
        Some(err) if err.is_degenerate() => 4,
        Some(_) => 2,
        None => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot set up {n} threads: {e}");
            return ExitCode::from(2);
        }
    }
    let start = Instant::now();
    match run(&cli) {
        Ok(report) => {
            let summary = json!({
                "version": commands::VERSION,
                "command": cli.command.name(),
                "config": report.config,
                "elapsed_s": start.elapsed().as_secs_f64(),
                "outputs": report.outputs,
                "result": report.result,
            });
            let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
            // a closed stdout (e.g. piped into `head`) is not a failure
            let _ = writeln!(std::io::stdout().lock(), "{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
