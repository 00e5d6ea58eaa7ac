//! Artifact bookkeeping: content hashes, `.meta.json` sidecars recording the
//! config hash and inputs that produced each artifact, atomic writes and the
//! JSON-lines stage log.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_hash(path: &Path) -> Result<String> {
    Ok(sha256_hex(&fs::read(path).with_context(|| format!("reading {}", path.display()))?))
}

/// Fails with a message naming the stage that produces `path`.
pub fn require_input(path: &Path, producer: &str) -> Result<()> {
    if !path.is_file() {
        anyhow::bail!("missing input {} (produced by the `{producer}` stage)", path.display());
    }
    Ok(())
}

pub fn meta_path(artifact: &Path) -> PathBuf {
    let mut name = artifact.file_name().unwrap_or_default().to_os_string();
    name.push(".meta.json");
    artifact.with_file_name(name)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactMeta {
    pub stage: String,
    pub config_hash: String,
    /// Hash over the stage name, its parameters and its input hashes.
    pub stage_key: String,
    pub inputs: BTreeMap<String, String>,
    pub sha256: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classes: Option<Vec<String>>,
}

/// The inputs and parameters that determine one stage's output.
pub struct StageSpec<'a> {
    pub stage: &'a str,
    pub params: serde_json::Value,
    pub inputs: Vec<PathBuf>,
    pub config_hash: &'a str,
    pub classes: Option<Vec<String>>,
}

impl StageSpec<'_> {
    fn input_hashes(&self) -> Result<BTreeMap<String, String>> {
        self.inputs
            .iter()
            .map(|p| Ok((p.display().to_string(), file_hash(p)?)))
            .collect()
    }

    fn key(&self, inputs: &BTreeMap<String, String>) -> String {
        let doc = serde_json::json!({ "stage": self.stage, "params": self.params, "inputs": inputs.values().collect::<Vec<_>>() });
        sha256_hex(doc.to_string().as_bytes())
    }

    /// True when every output exists unchanged and was made from the same key.
    pub fn up_to_date(&self, outputs: &[PathBuf]) -> Result<bool> {
        let key = self.key(&self.input_hashes()?);
        for out in outputs {
            let Ok(text) = fs::read_to_string(meta_path(out)) else {
                return Ok(false);
            };
            let Ok(meta) = serde_json::from_str::<ArtifactMeta>(&text) else {
                return Ok(false);
            };
            if meta.stage_key != key || !out.is_file() || file_hash(out)? != meta.sha256 {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Writes `bytes` to `path` atomically along with its sidecar.
    pub fn write(&self, path: &Path, bytes: &[u8]) -> Result<()> {
        let inputs = self.input_hashes()?;
        let meta = ArtifactMeta {
            stage: self.stage.to_string(),
            config_hash: self.config_hash.to_string(),
            stage_key: self.key(&inputs),
            inputs,
            sha256: sha256_hex(bytes),
            classes: self.classes.clone(),
        };
        write_atomic(path, bytes)?;
        write_atomic(&meta_path(path), serde_json::to_string_pretty(&meta)?.as_bytes())
    }
}

pub fn read_meta(artifact: &Path) -> Option<ArtifactMeta> {
    let text = fs::read_to_string(meta_path(artifact)).ok()?;
    serde_json::from_str(&text).ok()
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let mut tmp = path.as_os_str().to_os_string();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    pub status: String,
    pub outputs: Vec<String>,
    pub config_hash: String,
}

pub fn append_log(path: &Path, record: &StageRecord) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut f = fs::OpenOptions::new().create(true).append(true).open(path)?;
    writeln!(f, "{}", serde_json::to_string(record)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sidecar_round_trip_and_staleness() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("in.bin");
        let out = dir.path().join("out.bin");
        fs::write(&input, b"abc").unwrap();
        let spec = StageSpec {
            stage: "demo",
            params: serde_json::json!({"k": 1}),
            inputs: vec![input.clone()],
            config_hash: "cafe",
            classes: None,
        };
        assert!(!spec.up_to_date(std::slice::from_ref(&out)).unwrap());
        spec.write(&out, b"result").unwrap();
        assert!(spec.up_to_date(std::slice::from_ref(&out)).unwrap());
        assert_eq!(read_meta(&out).unwrap().config_hash, "cafe");
        fs::write(&input, b"abd").unwrap();
        assert!(!spec.up_to_date(std::slice::from_ref(&out)).unwrap());
        spec.write(&out, b"result").unwrap();
        fs::write(&out, b"tampered").unwrap();
        assert!(!spec.up_to_date(&[out]).unwrap());
    }

    #[test]
    fn missing_input_names_producer() {
        let err = require_input(Path::new("/nonexistent/x.osrf"), "extract-features").unwrap_err();
        assert!(err.to_string().contains("extract-features"));
    }
}
