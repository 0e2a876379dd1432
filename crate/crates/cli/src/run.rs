//! Run directories and manifests.
//!
//! Each invocation writes into a fresh `<out>/<command>-<UTC timestamp>`
//! directory (with a numeric suffix if that name is taken) and never
//! touches earlier runs. The manifest records the resolved configuration,
//! the seed, and SHA-256 hashes of every input and output file.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::Utc;
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

pub const MANIFEST: &str = "manifest.json";

pub struct RunDir {
    path: PathBuf,
    command: String,
    created: String,
}

#[derive(Debug, Serialize)]
struct FileHash {
    path: String,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    created_utc: &'a str,
    argv: Vec<String>,
    seed: Option<u64>,
    config: Value,
    inputs: Vec<FileHash>,
    outputs: Vec<FileHash>,
    notes: Value,
}

impl RunDir {
    pub fn create(base: &Path, command: &str) -> Result<Self> {
        fs::create_dir_all(base).map_err(CliError::io(base))?;
        let now = Utc::now();
        let stamp = now.format("%Y%m%dT%H%M%SZ").to_string();
        for attempt in 1.. {
            let name = if attempt == 1 {
                format!("{command}-{stamp}")
            } else {
                format!("{command}-{stamp}-{attempt}")
            };
            let path = base.join(name);
            match fs::create_dir(&path) {
                Ok(()) => {
                    return Ok(Self {
                        path,
                        command: command.to_string(),
                        created: now.to_rfc3339(),
                    })
                }
                Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
                Err(e) => return Err(CliError::io(&path)(e)),
            }
        }
        unreachable!()
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn join(&self, rel: impl AsRef<Path>) -> PathBuf {
        self.path.join(rel)
    }

    pub fn subdir(&self, rel: &str) -> Result<PathBuf> {
        let p = self.path.join(rel);
        fs::create_dir_all(&p).map_err(CliError::io(&p))?;
        Ok(p)
    }

    /// Writes the manifest and returns the run directory.
    pub fn finish(self, seed: Option<u64>, config: Value, inputs: &[PathBuf], notes: Value) -> Result<PathBuf> {
        let mut input_hashes = Vec::new();
        for input in inputs {
            for file in list_files(input)? {
                input_hashes.push(FileHash {
                    path: file.display().to_string(),
                    sha256: sha256_file(&file)?,
                });
            }
        }
        let mut outputs = Vec::new();
        for file in list_files(&self.path)? {
            let rel = file.strip_prefix(&self.path).expect("inside run dir");
            if rel == Path::new(MANIFEST) {
                continue;
            }
            outputs.push(FileHash {
                path: rel.display().to_string(),
                sha256: sha256_file(&file)?,
            });
        }
        let manifest = Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: &self.command,
            created_utc: &self.created,
            argv: std::env::args().collect(),
            seed,
            config,
            inputs: input_hashes,
            outputs,
            notes,
        };
        write_json(&self.path.join(MANIFEST), &manifest)?;
        Ok(self.path)
    }
}

/// Every regular file under `path` (or `path` itself), sorted.
pub fn list_files(path: &Path) -> Result<Vec<PathBuf>> {
    if path.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut out = Vec::new();
    let mut stack = vec![path.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).map_err(CliError::io(&dir))? {
            let p = entry.map_err(CliError::io(&dir))?.path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p);
            }
        }
    }
    out.sort();
    Ok(out)
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(CliError::io(path))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).map_err(CliError::io(path))?);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::Config(format!("serializing {}: {e}", path.display())))?;
    writeln!(w).map_err(CliError::io(path))?;
    w.flush().map_err(CliError::io(path))
}

/// Creates `path` and hands a buffered writer to `body`.
pub fn write_text(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).map_err(CliError::io(path))?);
    body(&mut w).and_then(|_| w.flush()).map_err(CliError::io(path))
}

/// Subject ids become file names; path separators are replaced.
pub fn file_stem_for(subject_id: &str) -> String {
    subject_id
        .chars()
        .map(|c| if c == '/' || c == '\\' || c == ':' { '_' } else { c })
        .collect()
}
