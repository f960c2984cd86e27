//! Run manifests: everything needed to re-run a command and check that it
//! reproduced its outputs.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct InputFile {
    pub path: String,
    pub sha256: String,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Manifest {
    pub format_version: u32,
    pub tool_version: String,
    /// Subcommand path, e.g. `eval link`.
    pub command: String,
    pub argv: Vec<String>,
    pub seed: u64,
    /// Every resolved configuration value, including input paths.
    pub config: BTreeMap<String, String>,
    /// Seeds handed to each stage, derived from `seed`.
    pub stage_seeds: BTreeMap<String, u64>,
    pub inputs: BTreeMap<String, InputFile>,
    /// Digest of every file written next to the manifest.
    pub outputs: BTreeMap<String, String>,
    pub timings_secs: BTreeMap<String, f64>,
    pub threads: usize,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(sha256_hex(&bytes))
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Manifest> {
        let text = fs::read_to_string(path).with_context(|| format!("reading manifest {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing manifest {}", path.display()))
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self)? + "\n";
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
    }
}

/// Wall-clock per named stage, in execution order.
#[derive(Default)]
pub struct Timings {
    stages: BTreeMap<String, f64>,
}

impl Timings {
    pub fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        *self.stages.entry(stage.to_owned()).or_default() += start.elapsed().as_secs_f64();
        out
    }

    pub fn into_map(self) -> BTreeMap<String, f64> {
        self.stages
    }
}
