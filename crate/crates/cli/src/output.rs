//! Staged outputs and the run manifest. Nothing touches disk until a
//! command has fully succeeded.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::args::Command;

#[derive(Debug, Serialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
struct Schemas {
    snapshot: u32,
    model: u32,
    index: u32,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    schemas: Schemas,
    seed: Option<u64>,
    /// Digest of the serialized run configuration below.
    config_sha256: String,
    /// Arguments after the program name; replaying them reproduces the outputs.
    argv: Vec<String>,
    run: &'a Command,
    inputs: &'a [FileDigest],
    outputs: Vec<FileDigest>,
    #[serde(skip_serializing_if = "Option::is_none")]
    details: Option<&'a serde_json::Value>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Streams a file through SHA-256.
pub fn digest_file(path: &Path) -> Result<FileDigest> {
    let mut f = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    let mut bytes = 0u64;
    loop {
        let n = f.read(&mut buf).with_context(|| format!("reading {}", path.display()))?;
        if n == 0 {
            break;
        }
        bytes += n as u64;
        h.update(&buf[..n]);
    }
    Ok(FileDigest {
        path: path.to_path_buf(),
        bytes,
        sha256: hex::encode(h.finalize()),
    })
}

/// Where the manifest of a run goes.
pub enum ManifestLocation {
    /// `manifest.json` inside an output directory.
    Dir(PathBuf),
    /// `<file>.manifest.json` beside a primary output file.
    Beside(PathBuf),
}

impl ManifestLocation {
    fn path(&self) -> PathBuf {
        match self {
            ManifestLocation::Dir(d) => d.join("manifest.json"),
            ManifestLocation::Beside(f) => {
                let mut name = f.file_name().map(|s| s.to_os_string()).unwrap_or_default();
                name.push(".manifest.json");
                f.with_file_name(name)
            }
        }
    }
}

pub struct Staged {
    files: Vec<(PathBuf, Vec<u8>)>,
    inputs: Vec<FileDigest>,
    seed: Option<u64>,
    details: Option<serde_json::Value>,
    location: ManifestLocation,
}

impl Staged {
    pub fn new(location: ManifestLocation) -> Self {
        Staged {
            files: Vec::new(),
            inputs: Vec::new(),
            seed: None,
            details: None,
            location,
        }
    }

    pub fn add(&mut self, path: impl Into<PathBuf>, bytes: Vec<u8>) {
        self.files.push((path.into(), bytes));
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        self.inputs.push(digest_file(path)?);
        Ok(())
    }

    pub fn seed(&mut self, seed: Option<u64>) {
        self.seed = seed;
    }

    pub fn details(&mut self, v: serde_json::Value) {
        self.details = Some(v);
    }

    /// Writes every staged file, then the manifest.
    pub fn commit(self, run: &Command) -> Result<PathBuf> {
        let mut outputs = Vec::with_capacity(self.files.len());
        for (path, bytes) in &self.files {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
            }
            fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))?;
            outputs.push(FileDigest {
                path: path.clone(),
                bytes: bytes.len() as u64,
                sha256: sha256_hex(bytes),
            });
        }
        let config = serde_json::to_vec(run)?;
        let manifest = Manifest {
            tool: "hci",
            version: env!("CARGO_PKG_VERSION"),
            schemas: Schemas {
                snapshot: hci_core::SNAPSHOT_SCHEMA_VERSION,
                model: hci_core::MODEL_SCHEMA_VERSION,
                index: hci_core::INDEX_SCHEMA_VERSION,
            },
            seed: self.seed,
            config_sha256: sha256_hex(&config),
            argv: std::env::args().skip(1).collect(),
            run,
            inputs: &self.inputs,
            outputs,
            details: self.details.as_ref(),
        };
        let path = self.location.path();
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        }
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}
