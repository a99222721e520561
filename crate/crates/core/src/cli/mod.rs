//! Configuration, command dispatch and bit-stable output bundles for the
//! `bohmflow` binary.
//!
//! Every command writes into one output directory: CSV tables with a single
//! header row (`name[unit]` columns, with `L`, `T`, `M`, `E` the length,
//! time, mass and energy units of the configured ħ and m), TOML reports,
//! binary snapshots with TOML sidecars, and `manifest.toml`, which lists the
//! SHA-256 of every file next to the effective configuration. Reals are
//! written in their shortest round-trip form, so identical inputs give
//! identical bytes regardless of the thread count.

mod barrier;
mod config;
mod output;
mod propagate;
mod schema;
mod twoslit;
mod wheeler;

use std::path::Path;

use thiserror::Error;

pub use barrier::ulps_apart;
pub use config::{key_listing, parse_document, CommandName, Origin, Overrides, RunConfig, Setting};
pub use output::{read_manifest, real, sha256_hex, BundleWriter, CsvTable, EmittedFile, Manifest, OutputBundle, MANIFEST};
pub use propagate::harmonic_potential;
pub use schema::{schema, KeySpec};
pub use wheeler::scenario;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Numerical(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// 1 for invalid input (including unreadable or unwritable paths),
    /// 2 for failures of a run that started from valid input.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Validation(_) | Self::Io { .. } => 1,
            Self::Numerical(_) => 2,
        }
    }
}

pub(crate) fn validate(cfg: &RunConfig) -> Result<(), CliError> {
    match cfg.command {
        CommandName::TwoSlit => twoslit::validate(cfg),
        CommandName::Barrier => barrier::validate(cfg),
        CommandName::Wheeler => wheeler::validate(cfg),
        CommandName::Propagate => propagate::validate(cfg),
    }
}

fn dispatch(cfg: &RunConfig) -> Result<OutputBundle, CliError> {
    let mut out = BundleWriter::create(&cfg.output_dir)?;
    match cfg.command {
        CommandName::TwoSlit => twoslit::run(cfg, &mut out)?,
        CommandName::Barrier => barrier::run(cfg, &mut out)?,
        CommandName::Wheeler => wheeler::run(cfg, &mut out)?,
        CommandName::Propagate => propagate::run(cfg, &mut out)?,
    }
    out.finish(cfg.command.as_str(), cfg.effective())
}

/// Runs the configured command, on a dedicated pool of `threads` workers
/// when given.
pub fn execute(cfg: &RunConfig, threads: Option<usize>) -> Result<OutputBundle, CliError> {
    match threads {
        None => dispatch(cfg),
        Some(0) => Err(CliError::Validation("--threads must be at least 1".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Numerical(format!("building the thread pool: {e}")))?;
            pool.install(|| dispatch(cfg))
        }
    }
}

/// Resolves the configuration and runs the command.
pub fn run_command(command: CommandName, overrides: &Overrides, output_dir: &Path, threads: Option<usize>) -> Result<OutputBundle, CliError> {
    let cfg = RunConfig::resolve(command, overrides, output_dir)?;
    execute(&cfg, threads)
}
