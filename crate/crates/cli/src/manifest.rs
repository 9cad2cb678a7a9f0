//! Run manifests: what a command was asked to do, hashed so every artifact
//! can name the run that produced it.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: &'static str,
    pub inputs: Vec<InputDigest>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub entity_kind: Option<String>,
    /// Window role (`fit`, `rca`, `test`, ...) to `START:END`.
    pub windows: BTreeMap<&'static str, String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model_config_hash: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Remaining command parameters, stringified.
    pub params: BTreeMap<&'static str, String>,
    pub out_dir: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl RunManifest {
    pub fn new(command: &'static str, out_dir: &Path) -> Self {
        Self {
            command,
            inputs: Vec::new(),
            entity_kind: None,
            windows: BTreeMap::new(),
            theta: None,
            model: None,
            model_config_hash: None,
            seed: None,
            params: BTreeMap::new(),
            out_dir: out_dir.display().to_string(),
        }
    }

    /// Records an input file by path and content digest.
    pub fn input(&mut self, path: &Path) -> Result<()> {
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        self.inputs.push(InputDigest {
            path: path.display().to_string(),
            sha256: sha256_hex(&bytes),
        });
        Ok(())
    }

    pub fn param(&mut self, key: &'static str, value: impl ToString) {
        self.params.insert(key, value.to_string());
    }

    pub fn hash(&self) -> String {
        sha256_hex(&serde_json::to_vec(self).expect("manifest serializes"))
    }

    /// Writes `<stem>.manifest.json` into the output directory and returns
    /// the hash.
    pub fn persist(&self, stem: &str) -> Result<String> {
        let hash = self.hash();
        let mut value = serde_json::to_value(self)?;
        value["hash"] = hash.clone().into();
        let text = serde_json::to_string_pretty(&value)? + "\n";
        let path = Path::new(&self.out_dir).join(format!("{stem}.manifest.json"));
        rspace_core::io::write_text(&path, &text)?;
        Ok(hash)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_tracks_every_field() {
        let mut a = RunManifest::new("fit", Path::new("out"));
        a.theta = Some(0.05);
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.seed = Some(1);
        assert_ne!(a.hash(), b.hash());
        a.param("top", 10);
        assert_eq!(a.hash().len(), 64);
    }
}
