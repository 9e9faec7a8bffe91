//! Optional TOML configuration. Command-line flags win over the file, and
//! the file wins over built-in defaults.

use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Deserialize;

/// Environment variable naming the default dictionary file.
pub const DICT_ENV: &str = "LFSC_DICT";

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub threads: Option<usize>,
    pub dict: Option<PathBuf>,
    pub q_skv: Option<u8>,
    pub q_res: Option<u8>,
    pub epsilon: Option<f64>,
    pub max_coeffs: Option<usize>,
    pub stride: Option<usize>,
    pub radius: Option<usize>,
    #[serde(default)]
    pub train: TrainConfig,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub atoms: Option<usize>,
    pub iterations: Option<usize>,
    pub sparsity: Option<usize>,
    pub patches: Option<usize>,
    pub seed: Option<u64>,
}

impl Config {
    pub fn load(path: &Path) -> anyhow::Result<Config> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).map_err(|e| crate::ArgError(format!("config {}: {e}", path.display())).into())
    }

    /// Dictionary path: flag, then config, then the environment.
    pub fn dict_path(&self, flag: Option<&Path>) -> Option<PathBuf> {
        flag.map(Path::to_path_buf)
            .or_else(|| self.dict.clone())
            .or_else(|| std::env::var_os(DICT_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
    }
}

/// First of flag, config value, default.
pub fn pick<T>(flag: Option<T>, config: Option<T>, default: T) -> T {
    flag.or(config).unwrap_or(default)
}
