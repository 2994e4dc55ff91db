//! Per-run manifest stored next to the CSV outputs.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::table::checksum;

pub const MANIFEST_FILE: &str = "manifest.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleRecord {
    pub label: String,
    pub requested: u64,
    pub used: u64,
    /// Realization indices that failed and were replaced.
    pub failed_indices: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub master_seed: u64,
    pub started: String,
    pub finished: String,
    pub config: Config,
    /// File name to SHA-256 of its contents.
    pub outputs: BTreeMap<String, String>,
    #[serde(default)]
    pub ensembles: Vec<EnsembleRecord>,
}

impl RunManifest {
    pub fn to_toml(&self) -> Result<String, toml::ser::Error> {
        toml::to_string(self)
    }

    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn load(dir: &Path) -> Result<Self, String> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::from_toml(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    /// Recomputes every output checksum; returns the mismatching files.
    pub fn verify(&self, dir: &Path) -> Result<Vec<String>, String> {
        let mut bad = Vec::new();
        for (name, sum) in &self.outputs {
            let bytes = std::fs::read(dir.join(name)).map_err(|e| format!("{name}: {e}"))?;
            if &checksum(&bytes) != sum {
                bad.push(name.clone());
            }
        }
        Ok(bad)
    }
}
