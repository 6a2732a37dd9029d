//! Command-line front end: configuration ingestion, experiment dispatch,
//! result persistence and plot emission.

// Negated comparisons like `!(x > 0)` are deliberate NaN-rejecting guards on
// user-supplied configuration values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod report;
pub mod run;
pub mod svg;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use config::{ModeConfig, RunConfig};
use run::RunError;

#[derive(Debug, Parser)]
#[command(name = "nvpair", version, about = "Spin-pair dressed-state simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one configured experiment and write its artifacts.
    Simulate {
        /// Path to a JSON run configuration.
        config: PathBuf,
        /// Override the configured seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (default: the config's output_dir, else ./out).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the evolution mode.
        #[arg(long, value_parser = ["rwa", "lab"])]
        mode: Option<String>,
        /// Also emit plot.svg.
        #[arg(long)]
        plot: bool,
    },
    /// Run the full benchmark scenario set and write a markdown report.
    ReproducePaper {
        #[arg(long, default_value = "reproduction")]
        out: PathBuf,
    },
    /// Parse and validate a sequence-format file.
    ParseSeq { file: PathBuf },
}

/// Execute a parsed command, returning the process exit code.
pub fn dispatch(cli: Cli) -> i32 {
    match cli.command {
        Command::Simulate { config, seed, out, mode, plot } => {
            simulate_command(&config, seed, out, mode, plot)
        }
        Command::ReproducePaper { out } => match report::reproduce(&out) {
            Ok(true) => {
                println!("all criteria passed; report at {}", out.join("report.md").display());
                0
            }
            Ok(false) => {
                eprintln!(
                    "one or more criteria failed; see {}",
                    out.join("report.md").display()
                );
                1
            }
            Err(e) => {
                eprintln!("error: {e}");
                e.exit_code()
            }
        },
        Command::ParseSeq { file } => parse_seq_command(&file),
    }
}

fn simulate_command(
    config_path: &Path,
    seed: Option<u64>,
    out: Option<PathBuf>,
    mode: Option<String>,
    plot: bool,
) -> i32 {
    let fallback_dir = out.clone().unwrap_or_else(|| PathBuf::from("out"));
    let text = match std::fs::read_to_string(config_path) {
        Ok(t) => t,
        Err(e) => {
            let err = RunError::Config(format!("cannot read {}: {e}", config_path.display()));
            run::write_error_record(&fallback_dir, &err);
            eprintln!("error: {err}");
            return err.exit_code();
        }
    };
    let mut cfg = match RunConfig::from_json(&text) {
        Ok(c) => c,
        Err(msg) => {
            let err = RunError::Config(msg);
            run::write_error_record(&fallback_dir, &err);
            eprintln!("error: {err}");
            return err.exit_code();
        }
    };
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    if let Some(mode) = mode {
        cfg.mode = if mode == "lab" { ModeConfig::Lab } else { ModeConfig::Rwa };
    }
    let out_dir = out
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));

    match run::execute(&cfg, &out_dir, plot) {
        Ok(artifacts) => {
            println!("wrote {}", artifacts.out_dir.join("summary.json").display());
            0
        }
        Err(err) => {
            run::write_error_record(&out_dir, &err);
            eprintln!("error: {err}");
            err.exit_code()
        }
    }
}

fn parse_seq_command(file: &Path) -> i32 {
    let text = match std::fs::read_to_string(file) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", file.display());
            return 2;
        }
    };
    match nvpair_sim::Sequence64::parse(&text) {
        Ok(seq) => {
            println!(
                "ok: {}: {} segment(s), total {} us, readout {} {}",
                if seq.name.is_empty() { "<unnamed>" } else { &seq.name },
                seq.segments.len(),
                seq.total_duration(),
                seq.readout.spin.label(),
                seq.readout.projector.token()
            );
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}
