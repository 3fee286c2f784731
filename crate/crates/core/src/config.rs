//! Run configuration shared by every stage and the provenance record
//! written next to each output.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::gtgen::GtConfig;
use crate::ingest::{read_bytes, write_bytes};
use crate::preprocess::FilterConfig;
use crate::rankcore::DEFAULT_WINDOW;
use crate::scorer::TrainConfig;
use crate::synth::SynthConfig;

pub const DEFAULT_LAMBDA: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub gt: GtConfig,
    pub filter: FilterConfig,
    pub train: TrainConfig,
    pub synth: SynthConfig,
    pub window: usize,
    pub lambda: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            gt: GtConfig::default(),
            filter: FilterConfig::default(),
            train: TrainConfig::default(),
            synth: SynthConfig::default(),
            window: DEFAULT_WINDOW,
            lambda: DEFAULT_LAMBDA,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str, path: &Path) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::MalformedJson {
            path: path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = read_bytes(path)?;
        let text = String::from_utf8(bytes).map_err(|e| Error::MalformedJson {
            path: path.to_path_buf(),
            line: 0,
            message: e.to_string(),
        })?;
        Self::from_json(&text, path)
    }

    pub fn validate(&self) -> Result<()> {
        self.gt.validate()?;
        self.filter.validate()?;
        self.train.validate()?;
        self.synth.validate()?;
        if self.window == 0 {
            return Err(Error::Config("window must be positive".into()));
        }
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return Err(Error::Config(format!(
                "lambda must lie in (0,1], got {}",
                self.lambda
            )));
        }
        Ok(())
    }

    /// Hex SHA-256 of the compact JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(json.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_hash: String,
    pub seed: Option<u64>,
    pub config: RunConfig,
}

impl Provenance {
    pub fn new(command: &str, config: &RunConfig, seed: Option<u64>) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config_hash: config.hash(),
            seed,
            config: config.clone(),
        }
    }

    /// `<file>.provenance.json` next to a file output.
    pub fn sidecar_for(output: &Path) -> PathBuf {
        let mut name = output.file_name().unwrap_or_default().to_os_string();
        name.push(".provenance.json");
        output.with_file_name(name)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self).expect("provenance serializes");
        text.push('\n');
        write_bytes(path, text.as_bytes())
    }

    pub fn write_for_file(&self, output: &Path) -> Result<()> {
        self.write(&Self::sidecar_for(output))
    }

    pub fn write_for_dir(&self, dir: &Path) -> Result<()> {
        self.write(&dir.join("provenance.json"))
    }
}
