//! Run manifests: what was run, with which inputs, producing which outputs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const TOOL: &str = "ehr-denoise";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    /// Arguments after the program name, as given.
    pub argv: Vec<String>,
    /// Every option after merging the config file and defaults.
    pub config: serde_json::Value,
    pub seeds: BTreeMap<String, u64>,
    pub threads: usize,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

/// SHA-256 of a file. For JSON evaluation summaries the wall-clock
/// `runtime_seconds` field is zeroed first so the digest covers only
/// reproducible content.
pub fn digest_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let canonical = match serde_json::from_slice::<serde_json::Value>(&bytes) {
        Ok(serde_json::Value::Object(mut map)) if map.contains_key("runtime_seconds") => {
            map.insert("runtime_seconds".into(), serde_json::json!(0.0));
            serde_json::to_vec(&map)?
        }
        _ => bytes,
    };
    Ok(hex::encode(Sha256::digest(&canonical)))
}

pub fn digests(paths: &[PathBuf]) -> Result<Vec<FileDigest>> {
    paths.iter().map(|p| Ok(FileDigest { path: p.clone(), sha256: digest_file(p)? })).collect()
}

impl RunManifest {
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)? + "\n";
        std::fs::write(path, text).with_context(|| format!("writing manifest {}", path.display()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading manifest {}", path.display()))?;
        let m: Self = serde_json::from_str(&text).with_context(|| format!("parsing manifest {}", path.display()))?;
        if m.tool != TOOL {
            bail!("manifest {} was not written by {TOOL}", path.display());
        }
        Ok(m)
    }

    /// Confirms the recorded inputs are unchanged.
    pub fn check_inputs(&self) -> Result<()> {
        for f in &self.inputs {
            let now = digest_file(&f.path)?;
            if now != f.sha256 {
                bail!("input {} changed since the manifest was written", f.path.display());
            }
        }
        Ok(())
    }

    /// Outputs whose current digest differs from the recorded one.
    pub fn mismatched_outputs(&self) -> Result<Vec<PathBuf>> {
        let mut bad = Vec::new();
        for f in &self.outputs {
            if digest_file(&f.path)? != f.sha256 {
                bad.push(f.path.clone());
            }
        }
        Ok(bad)
    }
}

/// `<path>.manifest.json`.
pub fn manifest_path_for(output: &Path) -> PathBuf {
    let mut s = output.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}
