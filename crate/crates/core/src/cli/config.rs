//! Experiment configuration (TOML). One file drives every subcommand; each
//! reads the tables it needs.
//!
//! ```toml
//! seed = 7                       # master seed (overridden by --seed)
//!
//! [model]                        # a model file ...
//! file = "model.toml"
//! # ... or a generator: family = "product" | "lattice" | "curie-weiss"
//! #                     | "spin-glass" | "erdos-renyi"
//! # n = 16, alpha = 0.5, edge_probability = 0.3, signs = "mixed"
//!
//! [statistic]                    # a polynomial file or a named family
//! family = "elementary"          # "magnetization" | "elementary"
//! degree = 2
//!
//! [oracle]
//! moments = [[0, 1], [2, 3]]
//! spectral_gap = true
//!
//! [sample]
//! k = 1000
//! burn_in = 500                  # optional
//! thinning = 10                  # optional: single-chain mode
//! encoding = "text"              # or "binary"
//!
//! [concentration]
//! k = 100000
//! grid_points = 40               # or r_grid = [...]
//! batch = "samples.txt"          # optional: reuse a batch
//!
//! [test]
//! batch = "samples.txt"
//! mode = "ferromagnetic"         # or "general"
//! epsilon = 0.5
//! edges = [[0, 1], [1, 2]]       # optional: known edge set
//! calibration = "calibration.toml" # optional: replaces the shipped file
//!
//! [calibrate]
//! trials = 200
//! target_rate = 0.85
//! ```
//!
//! Relative paths are resolved against the directory of the config file.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: Option<u64>,
    pub model: Option<ModelSpec>,
    pub statistic: Option<StatisticSpec>,
    pub oracle: Option<OracleConfig>,
    pub sample: Option<SampleConfig>,
    pub concentration: Option<ConcentrationConfig>,
    pub test: Option<TestConfig>,
    pub calibrate: Option<CalibrateConfig>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub file: Option<PathBuf>,
    pub family: Option<String>,
    pub n: Option<usize>,
    pub alpha: Option<f64>,
    pub rows: Option<usize>,
    pub cols: Option<usize>,
    pub edge_probability: Option<f64>,
    pub signs: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatisticSpec {
    pub file: Option<PathBuf>,
    pub family: Option<String>,
    pub degree: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    #[serde(default)]
    pub moments: Vec<Vec<usize>>,
    #[serde(default)]
    pub spectral_gap: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleConfig {
    pub k: usize,
    pub burn_in: Option<u64>,
    pub thinning: Option<u64>,
    pub encoding: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConcentrationConfig {
    pub k: Option<usize>,
    pub burn_in: Option<u64>,
    pub r_grid: Option<Vec<f64>>,
    pub grid_points: Option<usize>,
    pub batch: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestConfig {
    pub batch: PathBuf,
    pub mode: String,
    pub epsilon: f64,
    pub edges: Option<Vec<(usize, usize)>>,
    pub calibration: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrateConfig {
    pub trials: Option<usize>,
    pub target_rate: Option<f64>,
}

/// A parsed config with its base directory and the digest of its text.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub base_dir: PathBuf,
    pub text_digest: String,
}

impl LoadedConfig {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let config: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Parse(format!("config: {e}")))?;
        Ok(Self {
            config,
            base_dir: base_dir.to_path_buf(),
            text_digest: hex::encode(Sha256::digest(text.as_bytes())),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    pub fn empty() -> Self {
        Self::parse("", Path::new(".")).expect("empty config parses")
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    /// Digest binding a report to the config text and the effective master seed.
    pub fn digest_with_seed(&self, seed: u64) -> String {
        let mut h = Sha256::new();
        h.update(self.text_digest.as_bytes());
        h.update(seed.to_le_bytes());
        hex::encode(h.finalize())
    }
}
