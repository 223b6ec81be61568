//! Experiment driver for the `projpost` command line tool.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod artifacts;
pub mod config;
pub mod ct;
pub mod deblur;
pub mod density;
pub mod error;
pub mod verify;

use std::path::{Path, PathBuf};

use artifacts::{is_manifest, write_run, Manifest, Outcome};
use config::Config;
pub use error::CliError;

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "PROJPOST_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Deblur,
    Ct,
    Density,
    Verify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Self::Deblur => "deblur",
            Self::Ct => "ct",
            Self::Density => "density",
            Self::Verify => "verify",
        }
    }
}

/// Command-line overrides applied on top of the configuration file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub full_scale: bool,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

/// A finished run.
#[derive(Debug)]
pub struct RunResult {
    pub out_dir: PathBuf,
    pub manifest: Manifest,
    pub outcome: Outcome,
    /// Whether the outputs were compared with a manifest's hashes.
    pub replayed: bool,
    /// A failed check or replay mismatch; outputs are written regardless.
    pub verdict: Option<CliError>,
}

impl RunResult {
    /// The run itself, or its failed check as an error.
    pub fn checked(mut self) -> Result<Self, CliError> {
        match self.verdict.take() {
            Some(e) => Err(e),
            None => Ok(self),
        }
    }
}

/// Reads a configuration or a manifest. A manifest also yields the hashes
/// its outputs must reproduce.
pub fn load(command: Command, path: &Path) -> Result<(Config, Option<Manifest>), CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    if is_manifest(&text) {
        let m = Manifest::from_toml(&text)?;
        if m.command != command.name() {
            return Err(CliError::Config(format!("manifest was written by `{}`, not `{}`", m.command, command.name())));
        }
        Ok((m.config.clone(), Some(m)))
    } else {
        Ok((Config::from_toml(&text)?, None))
    }
}

pub fn apply(command: Command, cfg: &mut Config, o: &Overrides) -> Result<(), CliError> {
    if let Some(seed) = o.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &o.out {
        cfg.out = Some(out.clone());
    }
    if o.full_scale {
        if command != Command::Ct {
            return Err(CliError::Config("--full-scale applies to `ct` only".into()));
        }
        cfg.ct.full_scale();
    }
    cfg.validate()
}

pub fn dispatch(command: Command, cfg: &Config) -> Result<Outcome, CliError> {
    match command {
        Command::Deblur => deblur::command(cfg),
        Command::Ct => ct::command(cfg),
        Command::Density => density::command(cfg),
        Command::Verify => verify::command(cfg),
    }
}

fn same_run(a: &Config, b: &Config) -> bool {
    // the output directory does not influence any result
    Config { out: None, ..a.clone() } == Config { out: None, ..b.clone() }
}

/// Loads the configuration, runs the command and writes its outputs.
///
/// Replaying a manifest with unchanged settings checks every output
/// against the recorded hashes. Failed checks end up in
/// [`RunResult::verdict`]; see [`RunResult::checked`].
pub fn execute(command: Command, config: &Path, overrides: &Overrides) -> Result<RunResult, CliError> {
    let (mut cfg, manifest) = load(command, config)?;
    apply(command, &mut cfg, overrides)?;
    let expected = manifest.filter(|m| same_run(&m.config, &cfg)).map(|m| m.outputs);
    let out_dir = cfg.out.clone().unwrap_or_else(|| Path::new("runs").join(command.name()));
    let outcome = dispatch(command, &cfg)?;
    let written = write_run(&out_dir, command.name(), &cfg, &outcome)?;
    let mismatch = expected.as_ref().map(|e| written.mismatches(e)).filter(|bad| !bad.is_empty());
    let verdict = match (mismatch, &outcome.failure) {
        (Some(bad), _) => Some(CliError::Verification(format!("replay differs from the manifest in {}", bad.join(", ")))),
        (None, Some(f)) => Some(CliError::Verification(f.clone())),
        (None, None) => None,
    };
    Ok(RunResult {
        out_dir,
        manifest: written,
        outcome,
        replayed: expected.is_some(),
        verdict,
    })
}

/// Sizes the global thread pool from [`THREADS_ENV`]; unset or `0` keeps
/// the default of one thread per core.
pub fn init_threads() -> Result<(), CliError> {
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| CliError::Config(format!("{THREADS_ENV} must be a nonnegative integer, got {v:?}")))?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))
}
