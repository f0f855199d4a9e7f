use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Provenance record written next to every command's outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub argv: Vec<String>,
    pub config: serde_json::Value,
    /// `sha256` over the blob hashes of every input file, in argument order.
    pub input_hash: String,
    pub inputs: Vec<InputFile>,
    /// Paths relative to the output directory.
    pub outputs: Vec<String>,
    pub wall_clock_secs: f64,
    pub versions: Versions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputFile {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Versions {
    pub primcodec: String,
    pub dataset_format: u32,
    pub checkpoint_format: u32,
}

impl Default for Versions {
    fn default() -> Self {
        Self {
            primcodec: env!("CARGO_PKG_VERSION").to_string(),
            dataset_format: crate::trajectory::DATASET_FORMAT_VERSION,
            checkpoint_format: crate::mtrnn::CHECKPOINT_FORMAT_VERSION,
        }
    }
}

/// Hash of `bytes` framed like a git blob: `sha256("blob <len>\0" ‖ bytes)`.
pub fn git_blob_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    hex::encode(h.finalize())
}

/// Collects inputs and outputs of one command and writes the manifest.
pub(crate) struct RunRecorder {
    command: String,
    argv: Vec<String>,
    out: Option<PathBuf>,
    inputs: Vec<InputFile>,
    outputs: Vec<String>,
    started: Instant,
}

impl RunRecorder {
    pub fn new(command: &str, argv: &[String], out: Option<&Path>) -> Result<Self> {
        if let Some(dir) = out {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        Ok(Self {
            command: command.to_string(),
            argv: argv.to_vec(),
            out: out.map(Path::to_path_buf),
            inputs: Vec::new(),
            outputs: Vec::new(),
            started: Instant::now(),
        })
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        self.inputs.push(InputFile {
            path: path.display().to_string(),
            sha256: git_blob_hash(&bytes),
        });
        Ok(())
    }

    pub fn out_dir(&self) -> Option<&Path> {
        self.out.as_deref()
    }

    fn target(&self, name: &str) -> Result<PathBuf> {
        let dir = self
            .out
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("no output directory".into()))?;
        let path = dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        Ok(path)
    }

    /// Registers a file written by someone else.
    pub fn produced(&mut self, name: &str) {
        if !self.outputs.iter().any(|o| o == name) {
            self.outputs.push(name.to_string());
        }
    }

    pub fn path_for(&mut self, name: &str) -> Result<PathBuf> {
        let p = self.target(name)?;
        self.produced(name);
        Ok(p)
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.path_for(name)?;
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::json(name, e))?;
        text.push('\n');
        self.write_bytes(name, text.as_bytes())
    }

    pub fn write_csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let path = self.path_for(name)?;
        let csv_err = |e| Error::Csv {
            path: path.clone(),
            source: e,
        };
        let mut w = csv::Writer::from_path(&path).map_err(csv_err)?;
        w.write_record(header).map_err(csv_err)?;
        for r in rows {
            w.write_record(r).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::io(&path, e))
    }

    /// Writes `manifest.json` when there is an output directory.
    pub fn finish(mut self, config: serde_json::Value) -> Result<Option<RunManifest>> {
        if self.out.is_none() {
            return Ok(None);
        }
        let mut h = Sha256::new();
        for i in &self.inputs {
            h.update(i.sha256.as_bytes());
            h.update(b"\n");
        }
        let mut outputs = self.outputs.clone();
        outputs.push(MANIFEST_FILE.to_string());
        let manifest = RunManifest {
            command: self.command.clone(),
            argv: self.argv.clone(),
            config,
            input_hash: hex::encode(h.finalize()),
            inputs: std::mem::take(&mut self.inputs),
            outputs,
            wall_clock_secs: self.started.elapsed().as_secs_f64(),
            versions: Versions::default(),
        };
        self.write_json(MANIFEST_FILE, &manifest)?;
        Ok(Some(manifest))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blob_hash_matches_git_framing() {
        // `git hash-object` of "hello\n" in a sha256 repository.
        assert_eq!(
            git_blob_hash(b"hello\n"),
            "2cf8d83d9ee29543b34a87727421fdecb7e3f3a183d337639025de576db9ebb4"
        );
        assert_ne!(git_blob_hash(b"a"), git_blob_hash(b"b"));
    }
}
