//! The `fpp` command-line tool: parses a run configuration, dispatches the
//! experiment and writes CSV, JSON and SVG artifacts.

pub mod commands;
pub mod config;
pub mod output;
pub mod render;

use std::ffi::OsString;
use std::path::PathBuf;
use std::time::Instant;

use clap::Parser;
use fpp_core::FppError;
use serde_json::json;

pub use config::{Command, ConfigError, Flags, RunConfig};
use output::Artifacts;
use render::Header;

/// A failed run, split by exit code.
#[derive(Debug)]
pub enum RunError {
    /// Exit code 2.
    Config(String),
    /// Exit code 1.
    Runtime(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Runtime(_) => 1,
        }
    }
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Config(m) => write!(f, "config error: {m}"),
            RunError::Runtime(m) => write!(f, "run failed: {m}"),
        }
    }
}

/// Name of the output directory for a config, `<command>-<hash>`.
pub fn output_dir_name(config: &RunConfig) -> String {
    format!("{}-{}", config.command, config.hash())
}

/// Validates and runs `config`, returning the directory that now holds the
/// artifacts. Nothing is written unless the run succeeds.
pub fn run(config: &RunConfig) -> Result<PathBuf, RunError> {
    config.validate().map_err(|e| RunError::Config(e.0))?;
    let resolved = config.resolve();
    let hash = config.hash();
    let header = Header {
        command: resolved.command.name().to_string(),
        seed: resolved.seed,
        config_hash: hash.clone(),
    };
    let mut out = Artifacts::new(header);
    let start = Instant::now();
    let results = commands::dispatch(&resolved, &mut out).map_err(|e| match e {
        FppError::Config(m) => RunError::Config(m),
        e @ FppError::Trial { .. } => RunError::Runtime(e.to_string()),
        e => RunError::Runtime(format!("{e} (master seed {})", resolved.seed)),
    })?;
    let mut echoed = resolved.clone();
    echoed.threads = 0;
    echoed.outdir = PathBuf::new();
    let summary = json!({
        "fpp": {
            "command": resolved.command.name(),
            "master_seed": resolved.seed,
            "config_hash": hash,
            "trial_seed": "derive_trial_seed(master_seed, trial_index)",
        },
        "config": serde_json::to_value(&echoed).expect("configs serialize"),
        "files": out.names(),
        "results": results,
    });
    out.json("summary.json", &summary);
    let dir = out
        .commit(&resolved.outdir, &output_dir_name(&resolved))
        .map_err(|e| RunError::Runtime(format!("cannot write output: {e}")))?;
    let threads = if resolved.threads == 0 { "auto".to_string() } else { resolved.threads.to_string() };
    eprintln!(
        "fpp: {} finished in {:.2}s (threads {threads}) -> {}",
        resolved.command,
        start.elapsed().as_secs_f64(),
        dir.display()
    );
    Ok(dir)
}

/// Full entry point: argument parsing, run, exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let flags = match Flags::try_parse_from(args) {
        Ok(f) => f,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let config = match flags.into_config() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("fpp: config error: {e}");
            return 2;
        }
    };
    match run(&config) {
        Ok(_) => 0,
        Err(e) => {
            eprintln!("fpp: {e}");
            e.exit_code()
        }
    }
}
