//! Checksummed file manifests for cohort bundles and experiment bundles.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub kind: String,
    pub files: Vec<FileEntry>,
    #[serde(default)]
    pub meta: serde_json::Value,
}

impl Manifest {
    /// Checksums every file under `root` except the manifest itself.
    pub fn scan(kind: &str, root: &Path, meta: serde_json::Value) -> Result<Self> {
        let mut paths = list_files(root)?;
        paths.retain(|p| p != MANIFEST_FILE);
        let files = paths
            .into_iter()
            .map(|rel| file_entry(root, &rel))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            kind: kind.to_string(),
            files,
            meta,
        })
    }

    pub fn write(&self, root: &Path) -> Result<PathBuf> {
        let path = root.join(MANIFEST_FILE);
        let json = serde_json::to_string_pretty(self)?;
        fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    pub fn read(root: &Path) -> Result<Self> {
        let path = root.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Outcome of re-checking a bundle against its manifest.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub checked: usize,
    pub mismatched: Vec<String>,
    pub missing: Vec<String>,
    pub unlisted: Vec<String>,
}

impl VerifyReport {
    pub fn is_intact(&self) -> bool {
        self.mismatched.is_empty() && self.missing.is_empty() && self.unlisted.is_empty()
    }
}

pub fn verify(root: &Path) -> Result<VerifyReport> {
    let manifest = Manifest::read(root)?;
    let mut report = VerifyReport::default();
    for entry in &manifest.files {
        let path = root.join(&entry.path);
        if !path.is_file() {
            report.missing.push(entry.path.clone());
            continue;
        }
        report.checked += 1;
        if sha256_file(&path)? != entry.sha256 {
            report.mismatched.push(entry.path.clone());
        }
    }
    for rel in list_files(root)? {
        if rel != MANIFEST_FILE && !manifest.files.iter().any(|e| e.path == rel) {
            report.unlisted.push(rel);
        }
    }
    Ok(report)
}

pub fn sha256_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_bytes(&bytes))
}

fn file_entry(root: &Path, rel: &str) -> Result<FileEntry> {
    let path = root.join(rel);
    let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    Ok(FileEntry {
        path: rel.to_string(),
        sha256: sha256_bytes(&bytes),
        bytes: bytes.len() as u64,
    })
}

/// Relative paths (with `/` separators) of all files below `root`, sorted.
pub fn list_files(root: &Path) -> Result<Vec<String>> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<String>) -> Result<()> {
        for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
            let entry = entry.map_err(|e| Error::io(dir, e))?;
            let path = entry.path();
            if path.is_dir() {
                walk(root, &path, out)?;
            } else {
                let rel = path
                    .strip_prefix(root)
                    .map_err(|e| Error::Internal(e.to_string()))?;
                let rel: Vec<String> = rel
                    .components()
                    .map(|c| c.as_os_str().to_string_lossy().into_owned())
                    .collect();
                out.push(rel.join("/"));
            }
        }
        Ok(())
    }
    let mut out = Vec::new();
    walk(root, root, &mut out)?;
    out.sort();
    Ok(out)
}
