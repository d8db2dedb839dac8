//! Run bookkeeping: input digest, written artifacts, JSON run report.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Serialize)]
pub struct RunReport {
    pub command: String,
    /// SHA-256 over the command line and the bytes of every input file.
    pub input_digest: String,
    pub artifacts: Vec<PathBuf>,
    pub wall_time_s: f64,
    pub version: String,
}

pub struct RunContext {
    command: String,
    hasher: Sha256,
    artifacts: Vec<PathBuf>,
}

impl RunContext {
    pub fn new(command: &str) -> Self {
        let mut hasher = Sha256::new();
        for arg in std::env::args_os().skip(1) {
            hasher.update(arg.as_encoded_bytes());
            hasher.update([0u8]);
        }
        RunContext {
            command: command.to_string(),
            hasher,
            artifacts: Vec::new(),
        }
    }

    /// Folds an input file into the digest; fails with the path if unreadable.
    pub fn input_file(&mut self, path: &Path) -> Result<()> {
        let bytes = fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
        self.hasher.update(path.as_os_str().as_encoded_bytes());
        self.hasher.update((bytes.len() as u64).to_le_bytes());
        self.hasher.update(&bytes);
        Ok(())
    }

    pub fn record_artifact(&mut self, path: &Path) {
        if !self.artifacts.iter().any(|p| p == path) {
            self.artifacts.push(path.to_path_buf());
        }
    }

    pub fn write_artifact(&mut self, path: &Path, bytes: &[u8]) -> Result<()> {
        fs::write(path, bytes).with_context(|| format!("cannot write {}", path.display()))?;
        self.record_artifact(path);
        Ok(())
    }

    /// Writes to `path`, or to stdout when `None`.
    pub fn emit(&mut self, path: Option<&Path>, bytes: &[u8]) -> Result<()> {
        match path {
            Some(p) => self.write_artifact(p, bytes),
            None => {
                let mut out = std::io::stdout().lock();
                out.write_all(bytes).context("writing to stdout")?;
                out.flush().context("writing to stdout")
            }
        }
    }

    pub fn finish(self, path: &Path, elapsed: Duration) -> Result<()> {
        for a in &self.artifacts {
            if !a.exists() {
                bail!("artifact {} is missing", a.display());
            }
        }
        let report = RunReport {
            command: self.command,
            input_digest: format!("sha256:{}", hex::encode(self.hasher.finalize())),
            artifacts: self.artifacts,
            wall_time_s: elapsed.as_secs_f64(),
            version: env!("CARGO_PKG_VERSION").to_string(),
        };
        let mut text = serde_json::to_string_pretty(&report)?;
        text.push('\n');
        fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
    }
}
