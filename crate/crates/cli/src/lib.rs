//! Batch runner behind the `ghzlab` binary.

pub mod config;
pub mod experiments;

use std::fmt;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::json;

pub use config::ExperimentConfig;
pub use experiments::Artifacts;

/// Version of every JSON document written by the runner.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Numerical(#[from] ghz_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io { .. } => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Simulate,
    PhaseScan,
    Tomography,
    Witness,
    Bell,
    BellSweep,
    Ablation,
    Qss,
    Calibrate,
    Rate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::PhaseScan => "phase-scan",
            Command::Tomography => "tomography",
            Command::Witness => "witness",
            Command::Bell => "bell",
            Command::BellSweep => "bell-sweep",
            Command::Ablation => "ablation",
            Command::Qss => "qss",
            Command::Calibrate => "calibrate",
            Command::Rate => "rate",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Runs `command` on an already validated config, without touching the disk.
pub fn execute(command: Command, cfg: &ExperimentConfig) -> Result<Artifacts, CliError> {
    use experiments as e;
    match command {
        Command::Simulate => e::simulate(cfg),
        Command::PhaseScan => e::phase_scan(cfg),
        Command::Tomography => e::tomography(cfg),
        Command::Witness => e::witness(cfg),
        Command::Bell => e::bell(cfg),
        Command::BellSweep => e::bell_sweep(cfg),
        Command::Ablation => e::ablation(cfg),
        Command::Qss => e::qss(cfg),
        Command::Calibrate => e::calibrate(cfg),
        Command::Rate => e::rate(cfg),
    }
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Runs `command` and writes its result files plus `manifest.json` into
/// `out_dir`. Returns the artifacts for printing.
pub fn run(
    command: Command,
    cfg: &ExperimentConfig,
    config_path: Option<&Path>,
    out_dir: &Path,
) -> Result<Artifacts, CliError> {
    cfg.validate()?;
    let artifacts = execute(command, cfg)?;
    std::fs::create_dir_all(out_dir).map_err(|source| CliError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    for (name, contents) in &artifacts.files {
        write(&out_dir.join(name), contents)?;
    }
    let timestamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let manifest = json!({
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "config_file": config_path.map(|p| p.display().to_string()),
        "config": cfg,
        "seed": cfg.seed,
        "versions": {
            "ghz-cli": env!("CARGO_PKG_VERSION"),
        },
        "threads": rayon::current_num_threads(),
        "files": artifacts.files.iter().map(|(n, _)| n).collect::<Vec<_>>(),
        "unix_time": timestamp,
    });
    write(
        &out_dir.join(format!("{}.manifest.json", command.name())),
        &serde_json::to_string_pretty(&manifest).expect("manifest serializes"),
    )?;
    Ok(artifacts)
}
