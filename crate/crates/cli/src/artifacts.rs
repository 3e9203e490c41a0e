//! Output directory with a manifest of every artifact and its SHA-256.

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Serialize)]
pub struct Entry {
    pub file: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    artifacts: &'a [Entry],
}

pub struct OutputDir {
    root: PathBuf,
    command: &'static str,
    entries: Vec<Entry>,
}

pub fn sha256_hex(data: &[u8]) -> String {
    Sha256::digest(data)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

impl OutputDir {
    pub fn create(root: &Path, command: &'static str) -> Result<Self> {
        std::fs::create_dir_all(root)
            .with_context(|| format!("creating output directory {}", root.display()))?;
        Ok(Self {
            root: root.to_owned(),
            command,
            entries: Vec::new(),
        })
    }

    /// Writes `data` to `name` (relative, `/`-separated) and records it.
    pub fn write(&mut self, name: &str, data: &[u8]) -> Result<()> {
        let path = self.root.join(name);
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
        std::fs::write(&path, data).with_context(|| format!("writing {}", path.display()))?;
        self.entries.retain(|e| e.file != name);
        self.entries.push(Entry {
            file: name.to_string(),
            bytes: data.len(),
            sha256: sha256_hex(data),
        });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    /// Writes `manifest.json` and returns the recorded entries.
    pub fn finish(mut self) -> Result<Vec<Entry>> {
        self.entries.sort_by(|a, b| a.file.cmp(&b.file));
        let m = Manifest {
            command: self.command,
            version: env!("CARGO_PKG_VERSION"),
            artifacts: &self.entries,
        };
        let mut text = serde_json::to_string_pretty(&m)?;
        text.push('\n');
        let path = self.root.join("manifest.json");
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(self.entries)
    }
}
