//! Run manifests: one JSON record per invocation.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use se2fm::GridSpec;

#[derive(Debug, Clone, Serialize)]
pub struct OutputRecord {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ErrorRecord {
    pub code: String,
    pub message: String,
    /// What the error belongs to when a batch continues past it, e.g. a
    /// trace start.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub context: Option<String>,
}

impl ErrorRecord {
    pub fn new(code: &str, message: impl Into<String>) -> Self {
        ErrorRecord {
            code: code.to_string(),
            message: message.into(),
            context: None,
        }
    }

    pub fn with_context(mut self, context: impl Into<String>) -> Self {
        self.context = Some(context.into());
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::json!({ "error": self }).to_string()
    }
}

impl From<se2fm::Error> for ErrorRecord {
    fn from(e: se2fm::Error) -> Self {
        ErrorRecord::new(e.code(), e.to_string())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub config: serde_json::Value,
    pub grid: Option<GridSpec>,
    /// Wall-clock seconds per phase.
    pub timings: BTreeMap<String, f64>,
    pub outputs: Vec<OutputRecord>,
    pub errors: Vec<ErrorRecord>,
}

impl RunManifest {
    pub fn new(subcommand: &str, config: serde_json::Value) -> Self {
        RunManifest {
            subcommand: subcommand.to_string(),
            config,
            grid: None,
            timings: BTreeMap::new(),
            outputs: Vec::new(),
            errors: Vec::new(),
        }
    }

    /// Record a written file with its checksum.
    pub fn output(&mut self, path: &Path) -> std::io::Result<()> {
        let bytes = fs::read(path)?;
        self.outputs.push(OutputRecord {
            path: path.to_path_buf(),
            sha256: hex::encode(Sha256::digest(&bytes)),
        });
        Ok(())
    }

    pub fn ok(&self) -> bool {
        self.errors.is_empty()
    }

    /// Written next to `out` as `<stem>.manifest.json`.
    pub fn path_for(out: &Path) -> PathBuf {
        let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        out.with_file_name(format!("{stem}.manifest.json"))
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        let json = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(path, json + "\n")
    }
}
