//! Run manifests: the exact inputs of a CLI run, written before any work.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST_SCHEMA: &str = "satuav.manifest.v1";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema: String,
    pub subcommand: String,
    /// Config path as given; `None` means the built-in defaults.
    pub config: Option<String>,
    /// sha256 of the config file bytes.
    pub config_hash: Option<String>,
    pub seed: u64,
    pub out_dir: String,
    pub tool_version: String,
    pub weights: Option<String>,
    pub weights_hash: Option<String>,
    pub oracle: bool,
    pub upload_during_hover: Option<bool>,
    pub force_interval: Option<usize>,
    pub axis: Option<String>,
    pub values: Option<Vec<f64>>,
}

impl RunManifest {
    pub fn new(subcommand: &str, out_dir: &Path, seed: u64) -> Self {
        Self {
            schema: MANIFEST_SCHEMA.into(),
            subcommand: subcommand.into(),
            config: None,
            config_hash: None,
            seed,
            out_dir: out_dir.display().to_string(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            weights: None,
            weights_hash: None,
            oracle: false,
            upload_during_hover: None,
            force_interval: None,
            axis: None,
            values: None,
        }
    }

    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(dir.join(MANIFEST_FILE), text + "\n")
    }

    pub fn read(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let m: RunManifest = serde_json::from_str(&text)?;
        anyhow::ensure!(
            m.schema == MANIFEST_SCHEMA,
            "manifest schema `{}` is not `{MANIFEST_SCHEMA}`",
            m.schema
        );
        Ok(m)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = RunManifest::new("sweep", dir.path(), 9);
        m.axis = Some("p_max".into());
        m.values = Some(vec![1.0, 2.5]);
        m.write(dir.path()).unwrap();
        assert_eq!(RunManifest::read(&dir.path().join(MANIFEST_FILE)).unwrap(), m);
    }
}
