//! Command-line front end. Exit codes: 0 success, 2 config error, 3 numeric
//! failure, 4 I/O failure; every failure also emits a one-line JSON error
//! record on stderr so callers never have to parse prose.

mod config;
mod runner;

use clap::{Parser, Subcommand};
use config::{parse_config, parse_with_preset, ConfigError, PRESETS};
use runner::RunError;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "flatband",
    version,
    about = "Flat-band emitter experiments: Rabi traces, eta sweeps, disorder ensembles"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a config file, a preset, or both
    Run {
        /// Config file with key=value lines; applied on top of --preset
        config: Option<PathBuf>,
        /// Named parameter bundle: fig1, fig2, fig3a, fig3c
        #[arg(long)]
        preset: Option<String>,
        /// Master seed override
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory override
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the realized edge list (lattice.txt)
        #[arg(long)]
        dump_lattice: bool,
        /// Also write the lattice eigenvalues (spectrum.txt)
        #[arg(long)]
        dump_spectrum: bool,
        /// Worker threads; 0 uses every core
        #[arg(long)]
        threads: Option<usize>,
    },
}

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERIC: u8 = 3;
const EXIT_IO: u8 = 4;

fn fail(kind: &str, message: String, code: u8) -> ExitCode {
    let record = serde_json::json!({ "error": kind, "message": message, "exit": code });
    eprintln!("{record}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let Command::Run { config, preset, seed, out, dump_lattice, dump_spectrum, threads } =
        Cli::parse().command;

    if config.is_none() && preset.is_none() {
        return fail(
            "config",
            format!("provide a config file or --preset (one of: {})", PRESETS.join(", ")),
            EXIT_CONFIG,
        );
    }
    let text = match &config {
        Some(path) => match std::fs::read_to_string(path) {
            Ok(text) => text,
            Err(e) => {
                return fail("io", format!("{}: {e}", path.display()), EXIT_IO);
            }
        },
        None => String::new(),
    };

    let parsed = match preset.as_deref() {
        Some(name) => parse_with_preset(Some(name), &text),
        None => parse_config(&text),
    };
    let mut experiment = match parsed {
        Ok(experiment) => experiment,
        Err(e @ ConfigError::Parse { .. }) => {
            let source = config
                .as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_else(|| "--preset".into());
            return fail("config", format!("{source}: {e}"), EXIT_CONFIG);
        }
        Err(e) => return fail("config", e.to_string(), EXIT_CONFIG),
    };
    if let Some(seed) = seed {
        experiment.seed = seed;
    }
    if let Some(out) = out {
        experiment.out = out;
    }
    if let Some(threads) = threads {
        if threads > 1024 {
            return fail("config", "threads: more than 1024 workers is not supported".into(), EXIT_CONFIG);
        }
        experiment.threads = threads;
    }
    experiment.dump_lattice |= dump_lattice;
    experiment.dump_spectrum |= dump_spectrum;

    match runner::execute(&experiment) {
        Ok(summary) => {
            for warning in &summary.warnings {
                eprintln!("warning: {warning}");
            }
            for path in &summary.artifacts {
                println!("wrote {}", path.display());
            }
            ExitCode::SUCCESS
        }
        Err(RunError::Numeric(e)) => fail("numeric", e.to_string(), EXIT_NUMERIC),
        Err(RunError::Io(e)) => fail("io", e.to_string(), EXIT_IO),
    }
}
