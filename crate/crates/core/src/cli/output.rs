//! Output bundles: CSV tables, TOML reports, snapshots and a manifest of
//! SHA-256 hashes.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use toml::Table;

use super::CliError;
use crate::gridprop::{write_snapshot, GridWaveField};

pub const MANIFEST: &str = "manifest.toml";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmittedFile {
    /// Path relative to the bundle directory.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub files: Vec<EmittedFile>,
    /// Effective merged configuration.
    pub config: Table,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputBundle {
    pub dir: PathBuf,
    pub manifest: Manifest,
}

impl OutputBundle {
    pub fn manifest_path(&self) -> PathBuf {
        self.dir.join(MANIFEST)
    }

    /// Re-hashes every listed file; returns the paths whose bytes changed.
    pub fn verify(&self) -> Result<Vec<String>, CliError> {
        let mut bad = Vec::new();
        for f in &self.manifest.files {
            let bytes = fs::read(self.dir.join(&f.path)).map_err(|e| io_err(&self.dir.join(&f.path), e))?;
            if sha256_hex(&bytes) != f.sha256 || bytes.len() as u64 != f.bytes {
                bad.push(f.path.clone());
            }
        }
        Ok(bad)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut s = String::with_capacity(64);
    for b in digest.iter() {
        write!(s, "{b:02x}").expect("writing to a String");
    }
    s
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io {
        context: format!("writing {}", path.display()),
        source: e,
    }
}

/// Shortest representation that parses back to the same `f64`.
pub fn real(v: f64) -> String {
    format!("{v:?}")
}

/// Comma-separated table with a single header row.
#[derive(Debug, Clone)]
pub struct CsvTable {
    text: String,
    columns: usize,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        Self {
            text: format!("{}\n", header.join(",")),
            columns: header.len(),
        }
    }

    pub fn row(&mut self, cells: &[String]) {
        debug_assert_eq!(cells.len(), self.columns);
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.text.into_bytes()
    }
}

/// Collects files in an output directory and records their hashes.
#[derive(Debug)]
pub struct BundleWriter {
    dir: PathBuf,
    files: Vec<EmittedFile>,
}

impl BundleWriter {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn record(&mut self, name: &str, bytes: &[u8]) {
        self.files.push(EmittedFile {
            path: name.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        });
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| io_err(&path, e))?;
        self.record(name, bytes);
        Ok(())
    }

    pub fn table(&mut self, name: &str, table: CsvTable) -> Result<(), CliError> {
        self.write(name, &table.into_bytes())
    }

    pub fn report(&mut self, name: &str, report: &Table) -> Result<(), CliError> {
        let text = toml::to_string(report).map_err(|e| CliError::Numerical(format!("serialising {name}: {e}")))?;
        self.write(name, text.as_bytes())
    }

    /// Binary snapshot plus sidecar, both hashed from the bytes on disk.
    pub fn snapshot(&mut self, stem: &str, field: &GridWaveField, stage: usize, label: &str) -> Result<(), CliError> {
        let (bin, side) = write_snapshot(&self.dir, stem, field, stage, label).map_err(|e| io_err(&self.dir.join(stem), e))?;
        for path in [bin, side] {
            let bytes = fs::read(&path).map_err(|e| io_err(&path, e))?;
            let name = path
                .file_name()
                .and_then(|n| n.to_str())
                .expect("snapshot names are UTF-8")
                .to_string();
            self.record(&name, &bytes);
        }
        Ok(())
    }

    /// Writes the manifest and returns the bundle.
    pub fn finish(self, command: &str, config: Table) -> Result<OutputBundle, CliError> {
        let manifest = Manifest {
            command: command.to_string(),
            files: self.files,
            config,
        };
        let text = toml::to_string(&manifest).map_err(|e| CliError::Numerical(format!("serialising the manifest: {e}")))?;
        let path = self.dir.join(MANIFEST);
        fs::write(&path, text).map_err(|e| io_err(&path, e))?;
        Ok(OutputBundle {
            dir: self.dir,
            manifest,
        })
    }
}

/// Reads a manifest written by [`BundleWriter::finish`].
pub fn read_manifest(dir: &Path) -> Result<Manifest, CliError> {
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| CliError::Io {
        context: format!("reading {}", path.display()),
        source: e,
    })?;
    toml::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {}", path.display(), e.message())))
}
