use std::path::{Component, Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::envs::pool::{sha256_hex, write_atomic};
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    /// Path relative to the run directory, `/`-separated.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

/// Record of one command invocation, written last and atomically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub argv: Vec<String>,
    pub version: String,
    pub seed: Option<u64>,
    /// Config file text exactly as read.
    pub config_source: Option<String>,
    /// `key = value` overrides applied on top of the file.
    pub overrides: Vec<(String, String)>,
    /// Fully resolved config after overrides.
    pub config: Option<String>,
    pub started: String,
    pub finished: String,
    pub files: Vec<FileEntry>,
}

impl RunManifest {
    pub fn load(run_dir: &Path) -> Result<Self> {
        let path = run_dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), e.to_string()))
    }

    /// Files whose size or hash no longer match, by relative path.
    pub fn verify(&self, run_dir: &Path) -> Result<Vec<String>> {
        let mut bad = Vec::new();
        for f in &self.files {
            let path = run_dir.join(&f.path);
            let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
            if bytes.len() as u64 != f.bytes || sha256_hex(&bytes) != f.sha256 {
                bad.push(f.path.clone());
            }
        }
        Ok(bad)
    }
}

pub fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

/// A run directory that tracks every file written into it.
#[derive(Debug)]
pub struct RunDir {
    root: PathBuf,
    files: Vec<FileEntry>,
}

impl RunDir {
    pub fn create(root: PathBuf) -> Result<Self> {
        std::fs::create_dir_all(&root).map_err(|e| Error::io(&root, e))?;
        Ok(RunDir { root, files: Vec::new() })
    }

    pub fn path(&self) -> &Path {
        &self.root
    }

    /// Writes `bytes` at `rel`, which must stay inside the run directory.
    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<PathBuf> {
        let rel_path = Path::new(rel);
        if rel == MANIFEST_FILE || rel_path.components().any(|c| !matches!(c, Component::Normal(_))) {
            return Err(Error::Contract(format!("refusing to write `{rel}` in a run directory")));
        }
        let path = self.root.join(rel_path);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        write_atomic(&path, bytes)?;
        self.files.retain(|f| f.path != rel);
        self.files.push(FileEntry {
            path: rel.to_string(),
            bytes: bytes.len() as u64,
            sha256: sha256_hex(bytes),
        });
        Ok(path)
    }

    /// Writes the manifest with the file inventory sorted by path.
    pub fn finish(mut self, mut manifest: RunManifest) -> Result<PathBuf> {
        self.files.sort_by(|a, b| a.path.cmp(&b.path));
        manifest.files = self.files;
        manifest.finished = now();
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
        let path = self.root.join(MANIFEST_FILE);
        write_atomic(&path, text.as_bytes())?;
        Ok(path)
    }
}
