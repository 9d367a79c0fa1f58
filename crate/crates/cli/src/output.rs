//! Output files with a manifest header for exact reruns.
//!
//! CSV files start with `# key value` lines (tool version, config hash,
//! seed, command) followed by the column header. JSON files carry the same
//! fields under a top-level `manifest` object.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    /// SHA-256 of the resolved config TOML.
    pub config_sha256: String,
    pub seed: u64,
}

impl Manifest {
    pub fn new(command: &str, cfg: &RunConfig) -> Self {
        let digest = Sha256::digest(cfg.to_toml().as_bytes());
        Self {
            tool: "irstrack",
            version: VERSION,
            command: command.to_string(),
            config_sha256: digest.iter().map(|b| format!("{b:02x}")).collect(),
            seed: cfg.seed,
        }
    }

    pub fn csv_header(&self) -> String {
        format!(
            "# tool {} {}\n# command {}\n# config_sha256 {}\n# seed {}\n",
            self.tool, self.version, self.command, self.config_sha256, self.seed
        )
    }
}

/// Writes files into one output directory, prefixing each with the manifest.
pub struct OutputDir {
    root: PathBuf,
    manifest: Manifest,
    written: Vec<PathBuf>,
}

impl OutputDir {
    pub fn create(root: &Path, manifest: Manifest) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(Self { root: root.to_path_buf(), manifest, written: Vec::new() })
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    fn write(&mut self, name: &str, body: &str) -> Result<PathBuf, CliError> {
        let path = self.root.join(name);
        fs::write(&path, body).map_err(|e| CliError::io(&path, e))?;
        log::info!("wrote {}", path.display());
        self.written.push(path.clone());
        Ok(path)
    }

    /// `csv` must start with its column header line.
    pub fn csv(&mut self, name: &str, csv: &str) -> Result<PathBuf, CliError> {
        let body = format!("{}{csv}", self.manifest.csv_header());
        self.write(name, &body)
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        #[derive(Serialize)]
        struct Wrapped<'a, T> {
            manifest: &'a Manifest,
            #[serde(flatten)]
            body: &'a T,
        }
        let text = serde_json::to_string_pretty(&Wrapped { manifest: &self.manifest, body: value })
            .map_err(|e| CliError::Config(e.to_string()))?;
        self.write(name, &(text + "\n"))
    }

    /// Plain text with `#` comment lines for the manifest.
    pub fn text(&mut self, name: &str, text: &str) -> Result<PathBuf, CliError> {
        let body = format!("{}{text}", self.manifest.csv_header());
        self.write(name, &body)
    }

    /// Resolved config with the manifest as leading comments.
    pub fn config(&mut self, cfg: &RunConfig) -> Result<PathBuf, CliError> {
        let body = format!("{}{}", self.manifest.csv_header(), cfg.to_toml());
        self.write("config.resolved.toml", &body)
    }
}
