//! Versioned record of an artifact-producing run.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{input, Result};

pub const RUN_FORMAT: &str = "srpac-run/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputEntry {
    /// Relative to the output directory.
    pub path: String,
    pub bytes: u64,
    /// FNV-1a 64 of the file contents, hex.
    pub fnv64: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format: String,
    pub tool_version: String,
    pub command: String,
    /// Fully resolved configuration; replaying it reproduces the outputs.
    pub config: serde_json::Value,
    pub seed: u64,
    pub threads: Option<usize>,
    pub outputs: Vec<OutputEntry>,
    pub wall_time_s: f64,
}

pub fn fnv64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3))
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value, seed: u64, threads: Option<usize>) -> Self {
        RunManifest {
            format: RUN_FORMAT.into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config,
            seed,
            threads,
            outputs: Vec::new(),
            wall_time_s: 0.0,
        }
    }

    /// Records every file in `paths`, sorted by relative path.
    pub fn record_outputs(&mut self, dir: &Path, paths: &[PathBuf]) -> Result<()> {
        let mut out = Vec::with_capacity(paths.len());
        for p in paths {
            let data = fs::read(p)?;
            let rel = p.strip_prefix(dir).unwrap_or(p).to_string_lossy().replace('\\', "/");
            out.push(OutputEntry { path: rel, bytes: data.len() as u64, fnv64: format!("{:016x}", fnv64(&data)) });
        }
        out.sort_by(|a, b| a.path.cmp(&b.path));
        self.outputs = out;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let m: RunManifest = serde_json::from_str(&fs::read_to_string(path)?)?;
        if m.format != RUN_FORMAT {
            return input(format!("unsupported run manifest format '{}'", m.format));
        }
        Ok(m)
    }

    /// Output entries that differ from `other`, by path.
    pub fn diff_outputs(&self, other: &RunManifest) -> Vec<String> {
        let mut bad = Vec::new();
        for a in &self.outputs {
            match other.outputs.iter().find(|b| b.path == a.path) {
                Some(b) if b == a => {}
                _ => bad.push(a.path.clone()),
            }
        }
        for b in &other.outputs {
            if !self.outputs.iter().any(|a| a.path == b.path) {
                bad.push(b.path.clone());
            }
        }
        bad
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fnv_known_value() {
        assert_eq!(fnv64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv64(b"a"), 0xaf63dc4c8601ec8c);
    }
}
