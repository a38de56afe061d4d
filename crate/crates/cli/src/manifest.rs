//! Reproducibility record written next to every output.

use std::fs::File;
use std::io;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use fuselab::data_model::write_json;
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::CliResult;

#[derive(Debug, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: &'static str,
    pub config: Value,
    pub inputs: Vec<InputDigest>,
    pub outputs: Vec<String>,
    pub started_unix: f64,
    pub finished_unix: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timing: Option<Value>,
}

pub fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0.0, |d| d.as_secs_f64())
}

pub fn sha256_file(path: &Path) -> CliResult<String> {
    let mut f = File::open(path).map_err(|e| fuselab::Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let mut h = Sha256::new();
    io::copy(&mut f, &mut h).map_err(|e| fuselab::Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

/// Collects what a subcommand read and wrote, then saves the manifest.
pub struct Recorder {
    subcommand: &'static str,
    started: f64,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    timing: Option<Value>,
}

impl Recorder {
    pub fn start(subcommand: &'static str) -> Self {
        Self {
            subcommand,
            started: unix_now(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            timing: None,
        }
    }

    pub fn input(&mut self, p: &Path) {
        self.inputs.push(p.to_path_buf());
    }

    pub fn output(&mut self, p: &Path) {
        self.outputs.push(p.to_path_buf());
    }

    pub fn timing(&mut self, v: Value) {
        self.timing = Some(v);
    }

    /// Writes the manifest to `path`.
    pub fn finish(self, config: Value, path: &Path) -> CliResult<()> {
        let inputs = self
            .inputs
            .iter()
            .map(|p| {
                Ok(InputDigest {
                    path: p.display().to_string(),
                    sha256: sha256_file(p)?,
                })
            })
            .collect::<CliResult<Vec<_>>>()?;
        let manifest = RunManifest {
            tool: "fuselab",
            version: env!("CARGO_PKG_VERSION"),
            subcommand: self.subcommand,
            config,
            inputs,
            outputs: self
                .outputs
                .iter()
                .map(|p| p.display().to_string())
                .collect(),
            started_unix: self.started,
            finished_unix: unix_now(),
            timing: self.timing,
        };
        write_json(&manifest, path)?;
        Ok(())
    }
}

/// `out.json` -> `out.manifest.json`, next to the file.
pub fn beside(file: &Path) -> PathBuf {
    let stem = file
        .file_stem()
        .map_or_else(|| "output".into(), |s| s.to_string_lossy().into_owned());
    file.with_file_name(format!("{stem}.manifest.json"))
}
