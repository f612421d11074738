//! Command-line front end: config ingestion, workload dispatch and result
//! files. `main.rs` is a thin wrapper around [`run_cli`].

pub mod config;
pub mod workloads;

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use config::{apply_overrides, read_document, validate_document, Workload};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_INVALID: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "qumode", version, about = "Qudit and bosonic-mode simulation experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Lattice gap extraction from real-time return amplitudes.
    Sqed(RunArgs),
    /// QAOA graph coloring with noise-directed remapping.
    Qaoa(RunArgs),
    /// Reservoir computing on damped oscillators.
    Reservoir(RunArgs),
    /// Gate synthesis from displacement, SNAP and beam-splitter blocks.
    Synth(RunArgs),
    /// Check a config without running it; lists every problem found.
    Validate(CommonArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Override a config value by dotted path, e.g. `reservoir.model.tau=0.5`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Override the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Output directory (overrides `output` in the config).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Failure with its exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invalid(_) => EXIT_INVALID,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

fn load(common: &CommonArgs) -> Result<Value, CliError> {
    let mut doc = read_document(&common.config).map_err(|e| CliError::Invalid(vec![e]))?;
    if !doc.is_object() {
        return Err(CliError::Invalid(vec!["config must be a JSON object".into()]));
    }
    apply_overrides(&mut doc, &common.overrides).map_err(|e| CliError::Invalid(vec![e]))?;
    if let Some(seed) = common.seed {
        doc["seed"] = json!(seed);
    }
    Ok(doc)
}

/// Problems in a config file (empty when valid).
pub fn validate(common: &CommonArgs) -> Result<Vec<String>, CliError> {
    let doc = load(common)?;
    Ok(validate_document(&doc).1)
}

/// Files written by a run.
#[derive(Debug)]
pub struct RunReport {
    pub out_dir: PathBuf,
    pub summary: String,
}

pub fn run_workload(workload: Workload, args: &RunArgs) -> Result<RunReport, CliError> {
    let started = SystemTime::now();
    let clock = Instant::now();
    let doc = load(&args.common)?;
    let (cfg, problems) = validate_document(&doc);
    let cfg = match cfg {
        Some(c) if problems.is_empty() => c,
        _ => return Err(CliError::Invalid(problems)),
    };
    if cfg.workload != workload {
        return Err(CliError::Invalid(vec![format!(
            "config workload is `{}` but the `{}` subcommand was used",
            cfg.workload.name(),
            workload.name()
        )]));
    }
    let base_dir = args.common.config.parent().map(Path::to_path_buf).unwrap_or_default();
    let out_dir = args
        .out
        .clone()
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from("qumode-out"));

    let output = workloads::run(&cfg, &base_dir).map_err(CliError::Runtime)?;

    let io = |e: std::io::Error| CliError::Runtime(format!("writing to {}: {e}", out_dir.display()));
    std::fs::create_dir_all(&out_dir).map_err(io)?;
    let pretty = |v: &Value| serde_json::to_string_pretty(v).expect("serializable") + "\n";
    std::fs::write(out_dir.join("result.json"), pretty(&output.result)).map_err(io)?;
    for (name, body) in &output.csv {
        std::fs::write(out_dir.join(name), body).map_err(io)?;
    }
    let meta = json!({
        "workload": workload.name(),
        "version": env!("CARGO_PKG_VERSION"),
        "started_unix_seconds": started.duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
        "elapsed_seconds": clock.elapsed().as_secs_f64(),
        "threads": available_threads(),
        "files": std::iter::once("result.json".to_string())
            .chain(output.csv.iter().map(|(n, _)| n.clone()))
            .collect::<Vec<_>>(),
    });
    std::fs::write(out_dir.join("meta.json"), pretty(&meta)).map_err(io)?;
    Ok(RunReport {
        summary: format!("{} -> {}", output.summary, out_dir.display()),
        out_dir,
    })
}

fn available_threads() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

/// Run a parsed command line, print the outcome and return the exit code.
pub fn run_cli(cli: Cli) -> i32 {
    let (workload, args) = match cli.command {
        Command::Validate(common) => {
            return match validate(&common) {
                Ok(problems) if problems.is_empty() => {
                    println!("{}: ok", common.config.display());
                    EXIT_OK
                }
                Ok(problems) => {
                    println!("{}: {} problem(s)", common.config.display(), problems.len());
                    for p in problems {
                        println!("  {p}");
                    }
                    EXIT_INVALID
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    e.exit_code()
                }
            };
        }
        Command::Sqed(a) => (Workload::Sqed, a),
        Command::Qaoa(a) => (Workload::Qaoa, a),
        Command::Reservoir(a) => (Workload::Reservoir, a),
        Command::Synth(a) => (Workload::Synth, a),
    };
    match run_workload(workload, &args) {
        Ok(report) => {
            println!("{}", report.summary);
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
