//! `ilc` — manifest-driven experiment runner for the trajectory-fingerprint
//! tuning loop. Every experiment is described by a TOML manifest, writes
//! CSV result tables plus a metadata record, and reproduces byte-for-byte
//! from the same manifest and seed.

mod experiments;
mod manifest;
mod output;

use anyhow::{anyhow, Result};
use clap::{Parser, Subcommand};
use manifest::ExperimentManifest;
use std::path::PathBuf;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

#[derive(Parser)]
#[command(name = "ilc", version, about = "tune chaotic plant inputs to match a trajectory fingerprint")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute an experiment manifest (or list the experiment kinds).
    Run {
        /// Manifest file (TOML). A run's metadata record also works.
        manifest: Option<PathBuf>,
        /// Print the kind-to-figure coverage matrix and exit.
        #[arg(long)]
        list: bool,
        /// Override the manifest seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (default: `<manifest stem>.out` in the working
        /// directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a manifest without running anything.
    Validate {
        manifest: PathBuf,
    },
}

fn main() {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run {
            manifest,
            list,
            seed,
            out,
        } => {
            if list {
                print!("{}", experiments::coverage_matrix());
                0
            } else {
                match manifest {
                    None => {
                        eprintln!("error: `run` needs a manifest path (or --list)");
                        2
                    }
                    Some(path) => match run(&path, seed, out) {
                        Ok(()) => 0,
                        Err(e) => {
                            eprintln!("error: {e:#}");
                            1
                        }
                    },
                }
            }
        }
        Command::Validate { manifest } => match validate(&manifest) {
            Ok(true) => 0,
            Ok(false) => 2,
            Err(e) => {
                eprintln!("error: {e:#}");
                2
            }
        },
    };
    std::process::exit(code);
}

fn validate(path: &PathBuf) -> Result<bool> {
    let manifest = ExperimentManifest::load(path)?;
    let errors = manifest.validate();
    if errors.is_empty() {
        println!("ok");
        Ok(true)
    } else {
        for error in &errors {
            println!("error: {error}");
        }
        Ok(false)
    }
}

fn run(path: &PathBuf, seed_override: Option<u64>, out: Option<PathBuf>) -> Result<()> {
    let mut manifest = ExperimentManifest::load(path)?;
    if let Some(seed) = seed_override {
        manifest.seed = seed;
    }
    let errors = manifest.validate();
    if !errors.is_empty() {
        return Err(anyhow!(
            "manifest invalid:\n{}",
            errors
                .iter()
                .map(|e| format!("  - {e}"))
                .collect::<Vec<_>>()
                .join("\n")
        ));
    }

    let out_dir = out.unwrap_or_else(|| {
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().to_string())
            .unwrap_or_else(|| "run".to_string());
        PathBuf::from(format!("{stem}.out"))
    });

    let started_unix = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let clock = Instant::now();
    let result = experiments::execute(&manifest)?;
    let wall_seconds = clock.elapsed().as_secs_f64();

    let written = output::write_run(&out_dir, &manifest, &result, wall_seconds, started_unix)?;
    println!(
        "{} (seed {}) finished in {:.2}s",
        manifest.kind, manifest.seed, wall_seconds
    );
    for file in written {
        println!("  wrote {}", file.display());
    }
    Ok(())
}
