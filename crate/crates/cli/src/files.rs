//! Input hashing, staged atomic outputs and run manifests.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Marks an error as caused by bad input rather than a runtime failure.
#[derive(Debug)]
pub struct Invalid(pub String);

impl fmt::Display for Invalid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Invalid {}

pub fn invalid(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::msg(Invalid(msg.into()))
}

pub trait ResultExt<T> {
    /// Tags the error as a validation failure with `msg` as context.
    fn invalid(self, msg: impl FnOnce() -> String) -> Result<T>;
}

impl<T, E> ResultExt<T> for std::result::Result<T, E>
where
    E: std::error::Error + Send + Sync + 'static,
{
    fn invalid(self, msg: impl FnOnce() -> String) -> Result<T> {
        self.map_err(|e| anyhow::Error::new(e).context(Invalid(msg())))
    }
}

pub fn is_invalid(e: &anyhow::Error) -> bool {
    e.chain().any(|c| c.downcast_ref::<Invalid>().is_some()) || e.downcast_ref::<Invalid>().is_some()
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Clone, Debug, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

/// Resolves relative paths against the data directory.
#[derive(Clone, Debug)]
pub struct Paths {
    pub data_dir: Option<PathBuf>,
}

impl Paths {
    pub fn resolve(&self, p: &Path) -> PathBuf {
        match &self.data_dir {
            Some(d) if p.is_relative() => d.join(p),
            _ => p.to_path_buf(),
        }
    }
}

/// Reads input files and remembers their digests.
#[derive(Debug)]
pub struct Inputs {
    pub paths: Paths,
    pub read: Vec<FileDigest>,
}

impl Inputs {
    pub fn new(paths: Paths) -> Self {
        Inputs { paths, read: Vec::new() }
    }

    /// Whole file contents and the resolved path used in diagnostics.
    pub fn read(&mut self, p: &Path) -> Result<(Vec<u8>, String)> {
        let path = self.paths.resolve(p);
        let name = path.display().to_string();
        let bytes = std::fs::read(&path).invalid(|| format!("cannot read {name}"))?;
        self.read.push(FileDigest {
            path: name.clone(),
            sha256: sha256_hex(&bytes),
            bytes: bytes.len(),
        });
        Ok((bytes, name))
    }
}

/// Output files held in memory until the run has succeeded.
#[derive(Debug, Default)]
pub struct Outputs {
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl Outputs {
    pub fn add(&mut self, path: PathBuf, bytes: Vec<u8>) {
        self.files.push((path, bytes));
    }

    pub fn add_json<T: Serialize>(&mut self, path: PathBuf, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.add(path, bytes);
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.files.is_empty()
    }

    pub fn into_files(self) -> Vec<(PathBuf, Vec<u8>)> {
        self.files
    }

    /// Writes every file and the manifest beside the first one. All files go
    /// to temporary names first and are renamed only once every write has
    /// succeeded.
    pub fn commit(mut self, manifest: Manifest) -> Result<Vec<PathBuf>> {
        let Some((first, _)) = self.files.first() else {
            return Ok(Vec::new());
        };
        let mut name = first.file_name().context("output path has no file name")?.to_os_string();
        name.push(".manifest.json");
        let manifest_path = first.with_file_name(name);
        let outputs: Vec<FileDigest> = self
            .files
            .iter()
            .map(|(p, b)| FileDigest {
                path: p.display().to_string(),
                sha256: sha256_hex(b),
                bytes: b.len(),
            })
            .collect();
        let mut bytes = serde_json::to_vec_pretty(&ManifestFile { manifest: &manifest, outputs })?;
        bytes.push(b'\n');
        self.files.push((manifest_path, bytes));

        let mut staged = Vec::with_capacity(self.files.len());
        for (path, bytes) in &self.files {
            let dir = match path.parent() {
                Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
                _ => PathBuf::from("."),
            };
            std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
            let mut tmp = tempfile::NamedTempFile::new_in(&dir).with_context(|| format!("creating a temporary file in {}", dir.display()))?;
            tmp.write_all(bytes)?;
            tmp.as_file().sync_all()?;
            staged.push((tmp, path.clone()));
        }
        let mut written = Vec::with_capacity(staged.len());
        for (tmp, path) in staged {
            tmp.persist(&path).with_context(|| format!("writing {}", path.display()))?;
            written.push(path);
        }
        Ok(written)
    }
}

/// Everything needed to rerun a command.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub args: Vec<String>,
    pub seed: Option<u64>,
    pub config: serde_json::Value,
    pub config_sha256: String,
    pub inputs: Vec<FileDigest>,
    pub formats: BTreeMap<&'static str, u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<serde_json::Value>,
}

#[derive(Serialize)]
struct ManifestFile<'a> {
    #[serde(flatten)]
    manifest: &'a Manifest,
    outputs: Vec<FileDigest>,
}

impl Manifest {
    pub fn new<C: Serialize>(command: &'static str, seed: Option<u64>, config: &C, inputs: Inputs) -> Result<Manifest> {
        let config = serde_json::to_value(config)?;
        let config_sha256 = sha256_hex(&serde_json::to_vec(&config)?);
        Ok(Manifest {
            tool: "mpe",
            version: env!("CARGO_PKG_VERSION"),
            command,
            args: std::env::args().skip(1).collect(),
            seed,
            config,
            config_sha256,
            inputs: inputs.read,
            formats: BTreeMap::from([
                ("items", mpe_core::dataset::ITEM_FORMAT_VERSION),
                ("graph", mpe_core::graph::GRAPH_FORMAT_VERSION),
                ("checkpoint", mpe_autodiff::CHECKPOINT_VERSION),
                ("model", mpe_core::models::MODEL_FORMAT_VERSION),
            ]),
            diagnostics: None,
        })
    }
}
