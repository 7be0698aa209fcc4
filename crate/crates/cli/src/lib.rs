//! Experiment runner behind the `gcds` binary.
//!
//! Every command resolves an [`ExperimentConfig`], writes it to
//! `resolved_config.json` in the output directory, runs, and writes its
//! artifacts atomically next to it. Wall-clock information goes to
//! `meta.json` only, so two runs with the same seed produce byte-identical
//! result files.

pub mod commands;
pub mod config;

use std::fmt;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use serde::Serialize;

pub use config::{CommandKind, ExperimentConfig, Flags};

#[derive(Debug, Parser)]
#[command(name = "gcds", version, about = "Conditional generative sampling experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a dataset from a simulation model.
    Simulate(Flags),
    /// Train a conditional generator; writes a checkpoint and the history.
    Train(Flags),
    /// Conditional mean, SD and quantiles at given or random covariates.
    Evaluate(Flags),
    /// Replicated metric table against the model's exact functionals.
    Table(Flags),
    /// Conditional density curves at the covariates in `--x`.
    Density(Flags),
    /// Prediction-interval coverage on held-out pairs.
    Coverage(Flags),
    /// Print configuration problems without running anything.
    Validate(Flags),
}

impl Command {
    pub fn split(&self) -> (CommandKind, &Flags) {
        match self {
            Command::Simulate(f) => (CommandKind::Simulate, f),
            Command::Train(f) => (CommandKind::Train, f),
            Command::Evaluate(f) => (CommandKind::Evaluate, f),
            Command::Table(f) => (CommandKind::Table, f),
            Command::Density(f) => (CommandKind::Density, f),
            Command::Coverage(f) => (CommandKind::Coverage, f),
            Command::Validate(f) => (CommandKind::Validate, f),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorKind {
    Config,
    Diverged,
    Io,
    Runtime,
}

/// A failed run, rendered as a JSON error record.
#[derive(Debug, Clone, Serialize)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError { kind: ErrorKind::Config, message: message.into() }
    }

    pub fn io(message: impl Into<String>) -> Self {
        CliError { kind: ErrorKind::Io, message: message.into() }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            ErrorKind::Config => 2,
            ErrorKind::Diverged => 3,
            ErrorKind::Io => 4,
            ErrorKind::Runtime => 1,
        }
    }

    pub fn record(&self) -> String {
        serde_json::json!({ "error": self.kind, "exit_code": self.exit_code(), "message": self.message }).to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}: {}", self.kind, self.message)
    }
}

impl From<gcds::Error> for CliError {
    fn from(e: gcds::Error) -> Self {
        let kind = if e.is_divergence() {
            ErrorKind::Diverged
        } else if e.is_io() {
            ErrorKind::Io
        } else {
            match e {
                gcds::Error::Config(_) | gcds::Error::Parse { .. } | gcds::Error::Schema { .. } => ErrorKind::Config,
                _ => ErrorKind::Runtime,
            }
        };
        CliError { kind, message: e.to_string() }
    }
}

/// The output directory of one run.
pub struct OutDir {
    root: PathBuf,
    written: Vec<String>,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(root).map_err(|e| CliError::io(format!("{}: {e}", root.display())))?;
        Ok(OutDir { root: root.to_path_buf(), written: Vec::new() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    /// Atomic write of one artifact; `name` must be a plain file name.
    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        if name.contains(['/', '\\']) || name.starts_with('.') {
            return Err(CliError { kind: ErrorKind::Runtime, message: format!("artifact name `{name}` leaves the output directory") });
        }
        gcds::io::write_atomic(&self.path(name), bytes)?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError { kind: ErrorKind::Runtime, message: e.to_string() })?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    pub fn written(&self) -> &[String] {
        &self.written
    }
}

fn unix_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

/// Runs one command and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    let (kind, flags) = cli.command.split();
    let cfg = match ExperimentConfig::resolve(kind, flags) {
        Ok(c) => c,
        Err(e) => return report(None, &e),
    };
    let violations = cfg.violations();
    if kind == CommandKind::Validate {
        println!("{}", serde_json::to_string_pretty(&violations).expect("strings serialize"));
        return if violations.is_empty() { 0 } else { 2 };
    }
    if !violations.is_empty() {
        return report(None, &CliError::config(violations.join("; ")));
    }
    let mut out = match OutDir::create(&cfg.out) {
        Ok(o) => o,
        Err(e) => return report(None, &e),
    };
    let started = unix_now();
    let result = out
        .write_json("resolved_config.json", &cfg)
        .and_then(|_| commands::dispatch(&cfg, &mut out));
    let finished = unix_now();
    let meta = serde_json::json!({
        "command": kind,
        "version": env!("CARGO_PKG_VERSION"),
        "started_unix": started,
        "finished_unix": finished,
        "elapsed_secs": finished - started,
        "status": if result.is_ok() { "ok" } else { "error" },
        "artifacts": out.written(),
    });
    let meta_written = out.write_json("meta.json", &meta);
    match result.and(meta_written) {
        Ok(()) => 0,
        Err(e) => report(Some(&mut out), &e),
    }
}

fn report(out: Option<&mut OutDir>, e: &CliError) -> i32 {
    let record = e.record();
    eprintln!("{record}");
    if let Some(out) = out {
        // Best effort: the record already went to stderr.
        let _ = out.write("error.json", format!("{record}\n").as_bytes());
    }
    e.exit_code()
}
