//! Run outputs, seed derivation and the replay manifest.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::Config;
use crate::error::CliError;

pub const MANIFEST_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.toml";
pub const CONFIG_FILE: &str = "config.toml";

/// A file produced by a run, relative to the output directory.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub path: String,
    pub bytes: Vec<u8>,
}

impl Artifact {
    pub fn new(path: impl Into<String>, bytes: Vec<u8>) -> Self {
        Self { path: path.into(), bytes }
    }

    /// Builds the contents with a writer callback.
    pub fn build(path: impl Into<String>, f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<Self, CliError> {
        let mut bytes = Vec::new();
        f(&mut bytes)?;
        Ok(Self::new(path, bytes))
    }

    pub fn text(path: impl Into<String>, lines: &[String]) -> Self {
        let mut s = lines.join("\n");
        s.push('\n');
        Self::new(path, s.into_bytes())
    }

    pub fn sha256(&self) -> String {
        hex(&Sha256::digest(&self.bytes))
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Everything a command produced: files, a printable report, the seeds it
/// drew from and, for checking commands, a failure message.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub artifacts: Vec<Artifact>,
    pub report: Vec<String>,
    pub seeds: BTreeMap<String, u64>,
    pub failure: Option<String>,
}

/// Seed of the stream named `tag` under the master seed. Distinct tags give
/// unrelated seeds; the mapping is fixed across versions.
pub fn derive_seed(master: u64, tag: &str) -> u64 {
    // FNV-1a of the tag, then a splitmix64 finalizer
    let h = tag
        .bytes()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3));
    let mut z = master.wrapping_add(h).wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Records what a run did so that it can be repeated and checked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub manifest_version: u32,
    pub command: String,
    /// Version of the program that wrote the manifest.
    pub version: String,
    /// Derived stream seeds, as hexadecimal strings (TOML integers are signed).
    pub seeds: BTreeMap<String, String>,
    pub config: Config,
    /// SHA-256 of every output file.
    pub outputs: BTreeMap<String, String>,
}

impl Manifest {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest is always representable as TOML")
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let m: Self = toml::from_str(text).map_err(|e| CliError::Config(format!("manifest: {e}")))?;
        if m.manifest_version != MANIFEST_VERSION {
            return Err(CliError::Config(format!("unsupported manifest version {}", m.manifest_version)));
        }
        m.config.validate()?;
        Ok(m)
    }

    /// Files whose hash differs from `expected`, or that are missing from
    /// either side.
    pub fn mismatches(&self, expected: &BTreeMap<String, String>) -> Vec<String> {
        let mut bad: Vec<String> = expected
            .iter()
            .filter(|(k, v)| self.outputs.get(*k) != Some(*v))
            .map(|(k, _)| k.clone())
            .collect();
        bad.extend(self.outputs.keys().filter(|k| !expected.contains_key(*k)).cloned());
        bad.sort();
        bad
    }
}

/// A configuration file is a manifest when it carries a manifest version.
pub fn is_manifest(text: &str) -> bool {
    text.parse::<toml::Table>().is_ok_and(|t| t.contains_key("manifest_version"))
}

/// Writes the artifacts, the effective configuration and the manifest into
/// `dir` and returns the manifest.
pub fn write_run(dir: &Path, command: &str, config: &Config, outcome: &Outcome) -> Result<Manifest, CliError> {
    fs::create_dir_all(dir)?;
    let mut outputs = BTreeMap::new();
    for a in &outcome.artifacts {
        let path = dir.join(&a.path);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::File::create(&path)?.write_all(&a.bytes)?;
        if outputs.insert(a.path.clone(), a.sha256()).is_some() {
            return Err(CliError::Numerical(format!("artifact {} written twice", a.path)));
        }
    }
    fs::write(dir.join(CONFIG_FILE), config.to_toml())?;
    let manifest = Manifest {
        manifest_version: MANIFEST_VERSION,
        command: command.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        seeds: outcome.seeds.iter().map(|(k, v)| (k.clone(), format!("{v:#018x}"))).collect(),
        config: config.clone(),
        outputs,
    };
    fs::write(dir.join(MANIFEST_FILE), manifest.to_toml())?;
    Ok(manifest)
}
