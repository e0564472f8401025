//! Run manifests. A manifest carries the full resolved configuration, so
//! passing it back as `--config manifest.json` repeats the run bit for bit.

use std::collections::BTreeMap;
use std::path::Path;

use ris_core::experiment::PlacedTarget;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::ImagerError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetMapping {
    pub requested: [f64; 3],
    pub index: usize,
    pub node: [f64; 3],
    pub distance_m: f64,
}

impl From<&PlacedTarget> for TargetMapping {
    fn from(p: &PlacedTarget) -> Self {
        Self {
            requested: [p.requested.x, p.requested.y, p.requested.z],
            index: p.index,
            node: [p.node.x, p.node.y, p.node.z],
            distance_m: p.distance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub config_path: Option<String>,
    /// SHA-256 of `resolved_config`.
    pub config_sha256: String,
    pub resolved_config: String,
    pub overrides: Vec<String>,
    pub master_seed: u64,
    pub seeds: BTreeMap<String, u64>,
    pub threads: usize,
    #[serde(default)]
    pub target_mapping: Vec<TargetMapping>,
    pub outputs: Vec<String>,
}

pub fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

impl Manifest {
    pub fn new(subcommand: &str, config_path: Option<&Path>, resolved_config: String, overrides: &[String]) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            subcommand: subcommand.into(),
            config_path: config_path.map(|p| p.display().to_string()),
            config_sha256: sha256_hex(&resolved_config),
            resolved_config,
            overrides: overrides.to_vec(),
            master_seed: 0,
            seeds: BTreeMap::new(),
            threads: rayon::current_num_threads(),
            target_mapping: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn write(&self, path: &Path) -> Result<(), ImagerError> {
        let text = serde_json::to_string_pretty(self).map_err(|e| ImagerError::format(path, e.to_string()))?;
        std::fs::write(path, text + "\n").map_err(|e| ImagerError::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self, ImagerError> {
        let text = std::fs::read_to_string(path).map_err(|e| ImagerError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| ImagerError::format(path, e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_hex("abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = Manifest::new("sweep", None, "a = 1\n".into(), &["a=1".into()]);
        m.seeds.insert("noise".into(), 42);
        let p = dir.path().join("manifest.json");
        m.write(&p).unwrap();
        assert_eq!(Manifest::read(&p).unwrap(), m);
        assert_eq!(m.config_sha256, sha256_hex("a = 1\n"));
    }
}
