//! Run directories and the persisted run configuration.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use tattoo_core::evalkit::DEFAULT_UNENROLLED_FRACTION;
use tattoo_core::model::ModelConfig;
use tattoo_core::pipeline::FeatureKind;
use tattoo_core::synthgen::DatasetConfig;

pub const RUN_CONFIG_FILE: &str = "run_config.toml";
pub const OUTPUT_ROOT_ENV: &str = "TATTOO_OUTPUT_ROOT";
const DEFAULT_OUTPUT_ROOT: &str = "runs";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitProtocol {
    Closed,
    Open,
}

/// Split and metric settings for `eval`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalSettings {
    pub protocol: SplitProtocol,
    pub splits: usize,
    pub seed: u64,
    pub unenrolled_fraction: f64,
    pub rank: usize,
    pub max_rank: Option<usize>,
    pub feature: FeatureKind,
}

impl Default for EvalSettings {
    fn default() -> Self {
        EvalSettings {
            protocol: SplitProtocol::Closed,
            splits: 5,
            seed: 0,
            unenrolled_fraction: DEFAULT_UNENROLLED_FRACTION,
            rank: 1,
            max_rank: None,
            feature: FeatureKind::Full,
        }
    }
}

/// Sections accepted by `--config`. A saved `run_config.toml` is itself a
/// valid config file.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(default)]
pub struct ConfigFile {
    pub synth: Option<DatasetConfig>,
    pub model: Option<ModelConfig>,
    pub eval: Option<EvalSettings>,
}

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(ConfigFile::default());
        };
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

/// Everything needed to rerun a command, written to every output directory.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunConfig {
    pub version: String,
    pub command: String,
    pub seed: Option<u64>,
    pub created: String,
    /// Resolved input/output paths and flag values.
    pub inputs: BTreeMap<String, String>,
    pub synth: Option<DatasetConfig>,
    pub model: Option<ModelConfig>,
    pub eval: Option<EvalSettings>,
}

impl RunConfig {
    pub fn new(command: &str, seed: Option<u64>) -> Self {
        RunConfig {
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            seed,
            created: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            inputs: BTreeMap::new(),
            synth: None,
            model: None,
            eval: None,
        }
    }

    pub fn input(mut self, key: &str, value: impl ToString) -> Self {
        self.inputs.insert(key.to_string(), value.to_string());
        self
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let text = toml::to_string_pretty(self).context("serialising run config")?;
        let path = dir.join(RUN_CONFIG_FILE);
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
    }
}

/// `--out` when given, otherwise `<root>/<command>-<UTC timestamp>`.
pub fn output_dir(out: Option<PathBuf>, command: &str) -> Result<PathBuf> {
    let dir = match out {
        Some(d) => d,
        None => {
            let root = std::env::var_os(OUTPUT_ROOT_ENV)
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_ROOT));
            let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%S%.3fZ");
            root.join(format!("{command}-{stamp}"))
        }
    };
    fs::create_dir_all(&dir)
        .with_context(|| format!("creating output directory {}", dir.display()))?;
    Ok(dir)
}
