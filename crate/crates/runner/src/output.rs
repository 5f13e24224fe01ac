//! Single-owner output directory with a checksummed file inventory.

use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

pub fn sha256_hex(data: &[u8]) -> String {
    Sha256::digest(data).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug)]
pub struct Outputs {
    dir: PathBuf,
    files: Vec<FileEntry>,
}

impl Outputs {
    pub fn create(dir: &Path) -> anyhow::Result<Self> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self { dir: dir.to_path_buf(), files: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, rel: &str, contents: impl AsRef<[u8]>) -> anyhow::Result<()> {
        let data = contents.as_ref();
        let path = self.dir.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(&path, data).with_context(|| format!("writing {}", path.display()))?;
        self.files.retain(|f| f.path != rel);
        self.files.push(FileEntry { path: rel.into(), sha256: sha256_hex(data), bytes: data.len() as u64 });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> anyhow::Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(rel, text)
    }

    pub fn files(&self) -> &[FileEntry] {
        &self.files
    }
}

/// Re-hashes every listed file; returns the paths whose contents changed.
pub fn verify(dir: &Path, files: &[FileEntry]) -> anyhow::Result<Vec<String>> {
    let mut bad = Vec::new();
    for f in files {
        let data = std::fs::read(dir.join(&f.path)).with_context(|| format!("reading {}", f.path))?;
        if sha256_hex(&data) != f.sha256 {
            bad.push(f.path.clone());
        }
    }
    Ok(bad)
}

/// Restricts a label to characters that are safe in file names.
pub fn slug(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' }).collect()
}
