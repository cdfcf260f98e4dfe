//! The run manifest: what was configured, which stages ran, and the hash of
//! every file they left behind.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ExperimentKind;
use crate::error::{CliError, CliResult};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const CONFIG_FILE: &str = "config.toml";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub kind: ExperimentKind,
    /// SHA-256 of the canonical configuration text in `config_file`.
    pub config_hash: String,
    pub code_version: String,
    pub master_seed: u64,
    pub config_file: String,
    pub seeds: Vec<ReplicateSeed>,
    pub stages: Vec<StageRecord>,
    /// Files written by `report`.
    #[serde(default)]
    pub report: Vec<FileRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicateSeed {
    pub replicate: usize,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageStatus {
    Pending,
    Complete,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub seed: u64,
    pub status: StageStatus,
    pub wall_time_secs: f64,
    pub checkpoints: Vec<FileRecord>,
    pub outputs: Vec<FileRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl StageRecord {
    pub fn pending(name: String, seed: u64) -> Self {
        StageRecord {
            name,
            seed,
            status: StageStatus::Pending,
            wall_time_secs: 0.0,
            checkpoints: Vec::new(),
            outputs: Vec::new(),
            error: None,
        }
    }
}

/// A file relative to the run directory and its SHA-256.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRecord {
    pub path: String,
    pub sha256: String,
}

impl FileRecord {
    pub fn of(root: &Path, rel: &str) -> CliResult<Self> {
        Ok(FileRecord {
            path: rel.to_string(),
            sha256: hash_file(&root.join(rel))?,
        })
    }

    /// `Ok(false)` when the file is gone or changed.
    pub fn intact(&self, root: &Path) -> CliResult<bool> {
        let path = root.join(&self.path);
        if !path.exists() {
            return Ok(false);
        }
        Ok(hash_file(&path)? == self.sha256)
    }
}

pub fn hash_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn hash_file(path: &Path) -> CliResult<String> {
    let mut f = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf).map_err(|e| CliError::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

impl RunManifest {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Integrity(format!("{}: {e}", path.display())))
    }

    /// Writes through a temporary file so an interrupted run never leaves a
    /// half-written manifest.
    pub fn save(&self, dir: &Path) -> CliResult<PathBuf> {
        let path = dir.join(MANIFEST_FILE);
        let tmp = dir.join(format!("{MANIFEST_FILE}.tmp"));
        let text = serde_json::to_string_pretty(self).expect("manifest serialises");
        fs::write(&tmp, text + "\n").map_err(|e| CliError::io(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }

    pub fn is_complete(&self) -> bool {
        self.stages.iter().all(|s| s.status == StageStatus::Complete)
    }

    pub fn files(&self) -> impl Iterator<Item = &FileRecord> {
        self.stages
            .iter()
            .flat_map(|s| s.checkpoints.iter().chain(&s.outputs))
            .chain(&self.report)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        assert_eq!(
            hash_bytes(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn file_records_detect_changes() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("a.csv"), "x\n").unwrap();
        let rec = FileRecord::of(dir.path(), "a.csv").unwrap();
        assert_eq!(rec.sha256, hash_bytes(b"x\n"));
        assert!(rec.intact(dir.path()).unwrap());
        fs::write(dir.path().join("a.csv"), "y\n").unwrap();
        assert!(!rec.intact(dir.path()).unwrap());
        fs::remove_file(dir.path().join("a.csv")).unwrap();
        assert!(!rec.intact(dir.path()).unwrap());
    }

    #[test]
    fn save_and_load() {
        let dir = tempfile::tempdir().unwrap();
        let m = RunManifest {
            kind: ExperimentKind::LearningCurve,
            config_hash: hash_bytes(b""),
            code_version: "0".into(),
            master_seed: 1,
            config_file: CONFIG_FILE.into(),
            seeds: vec![ReplicateSeed { replicate: 0, seed: 9 }],
            stages: vec![StageRecord::pending("summary".into(), 1)],
            report: Vec::new(),
        };
        let path = m.save(dir.path()).unwrap();
        assert_eq!(RunManifest::load(&path).unwrap(), m);
        assert!(!m.is_complete());
    }
}
