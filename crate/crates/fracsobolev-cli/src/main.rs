//! Batch front end: every capability as a subcommand reading one JSON config
//! and writing JSON/CSV reports plus a run manifest into the output
//! directory.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure.

mod commands;
mod config;

use clap::{Parser, Subcommand};
use fracsobolev::error::Error;
use serde::Serialize;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

#[derive(Parser)]
#[command(name = "fracsobolev", version, about = "Fractional Sobolev toolkit on compact manifolds")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON configuration file for the run
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory for reports and the manifest
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Seed for every pseudo-random draw in the run
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Worker threads (defaults to the rayon heuristic)
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Suppress progress output
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Build a quadrature grid and report its volume
    Grid,
    /// Check the kernel axioms (K1 integral, K3 pinch, K4 ladder)
    KernelCheck,
    /// Concentration sweep: L2/critical masses and energies along an eps ladder
    BubbleSweep,
    /// Estimate the optimal Sobolev constant from the Euclidean extremal
    BestConstant,
    /// Solve the nonlocal problem (single q or a continuation schedule)
    Solve,
    /// Existence-condition report for the critical problem
    Condition,
    /// Localized-norm equivalence band over random fields
    Equivalence,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Grid => "grid",
            Command::KernelCheck => "kernel-check",
            Command::BubbleSweep => "bubble-sweep",
            Command::BestConstant => "best-constant",
            Command::Solve => "solve",
            Command::Condition => "condition",
            Command::Equivalence => "equivalence",
        }
    }
}

#[derive(Serialize)]
struct RunManifest {
    command: String,
    config: String,
    out_dir: String,
    seed: u64,
    version: String,
    wall_time_seconds: f64,
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Config(_)
        | Error::Domain(_)
        | Error::Shape(_)
        | Error::Coverage { .. }
        | Error::Degenerate(_)
        | Error::Resolution(_) => 2,
        Error::Stagnation { .. } | Error::Continuation { .. } | Error::Numerical(_) => 3,
    }
}

fn run(cli: &Cli) -> fracsobolev::Result<Vec<PathBuf>> {
    let config = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("--config PATH is required".into()))?;
    let out = cli
        .out
        .as_ref()
        .ok_or_else(|| Error::Config("--out DIR is required".into()))?;
    std::fs::create_dir_all(out)
        .map_err(|e| Error::Config(format!("cannot create {}: {e}", out.display())))?;

    let written = match cli.command {
        Command::Grid => commands::cmd_grid(&config::load(config)?, out)?,
        Command::KernelCheck => commands::cmd_kernel_check(&config::load(config)?, out, cli.seed)?,
        Command::BubbleSweep => commands::cmd_bubble_sweep(&config::load(config)?, out)?,
        Command::BestConstant => commands::cmd_best_constant(&config::load(config)?, out)?,
        Command::Solve => commands::cmd_solve(&config::load(config)?, out, cli.seed)?,
        Command::Condition => commands::cmd_condition(&config::load(config)?, out)?,
        Command::Equivalence => commands::cmd_equivalence(&config::load(config)?, out, cli.seed)?,
    };
    Ok(written.files)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        // ignore failure when a pool is already installed
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    let start = Instant::now();
    match run(&cli) {
        Ok(files) => {
            if !cli.quiet {
                for f in &files {
                    println!("wrote {}", f.display());
                }
            }
            // the manifest is written last so it can record the wall time;
            // it is metadata, not a report, and is not byte-reproducible
            let manifest = RunManifest {
                command: cli.command.name().to_string(),
                config: cli.config.as_ref().unwrap().display().to_string(),
                out_dir: cli.out.as_ref().unwrap().display().to_string(),
                seed: cli.seed,
                version: env!("CARGO_PKG_VERSION").to_string(),
                wall_time_seconds: start.elapsed().as_secs_f64(),
            };
            let path = cli.out.as_ref().unwrap().join("manifest.json");
            match serde_json::to_string_pretty(&manifest) {
                Ok(text) => {
                    if let Err(e) = std::fs::write(&path, text + "\n") {
                        eprintln!("error: cannot write manifest: {e}");
                        return ExitCode::from(2);
                    }
                }
                Err(e) => {
                    eprintln!("error: manifest serialization failed: {e}");
                    return ExitCode::from(2);
                }
            }
            if !cli.quiet {
                println!("wrote {}", path.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
