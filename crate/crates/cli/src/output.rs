use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::CliError;

pub const HASH_PREFIX: &str = "# manifest_sha256=";

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    manifest_sha256: &'a str,
    config: &'a RunConfig,
    artifacts: &'a BTreeMap<String, String>,
    elapsed_seconds: f64,
}

/// Collects the artifacts of one run and writes its manifest.
#[derive(Debug)]
pub struct RunOutput {
    dir: PathBuf,
    hash: String,
    artifacts: BTreeMap<String, String>,
    started: Instant,
}

impl RunOutput {
    pub fn create(cfg: &RunConfig) -> Result<Self, CliError> {
        fs::create_dir_all(&cfg.out).map_err(CliError::io(&cfg.out))?;
        Ok(Self {
            dir: cfg.out.clone(),
            hash: cfg.hash(),
            artifacts: BTreeMap::new(),
            started: Instant::now(),
        })
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Writes a CSV artifact, prefixed by the manifest hash comment line.
    pub fn csv(&mut self, name: &str, body: &str) -> Result<PathBuf, CliError> {
        let text = format!("{HASH_PREFIX}{}\n{body}", self.hash);
        self.file(name, text.as_bytes())
    }

    pub fn file(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        fs::write(&path, bytes).map_err(CliError::io(&path))?;
        self.artifacts.insert(name.into(), hex::encode(Sha256::digest(bytes)));
        Ok(path)
    }

    pub fn finish(self, cfg: &RunConfig) -> Result<PathBuf, CliError> {
        let manifest = Manifest {
            manifest_sha256: &self.hash,
            config: cfg,
            artifacts: &self.artifacts,
            elapsed_seconds: self.started.elapsed().as_secs_f64(),
        };
        let path = self.path(&format!("{}.manifest.json", cfg.subcommand));
        let json = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
        fs::write(&path, json).map_err(CliError::io(&path))?;
        Ok(path)
    }
}

pub fn file_sha256(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(CliError::io(path))?;
    Ok(hex::encode(Sha256::digest(bytes)))
}

#[derive(Debug, serde::Deserialize)]
pub struct StoredManifest {
    pub manifest_sha256: String,
    pub config: serde_json::Value,
    pub artifacts: BTreeMap<String, String>,
}

pub fn read_manifest(path: &Path) -> Result<StoredManifest, CliError> {
    let bytes = fs::read(path).map_err(CliError::io(path))?;
    serde_json::from_slice(&bytes).map_err(|e| CliError::Config(format!("{}: malformed manifest: {e}", path.display())))
}
