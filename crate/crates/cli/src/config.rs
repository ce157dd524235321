//! Optional `key = value` config file; flags override it.

use std::path::PathBuf;

use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub corpus: Option<PathBuf>,
    pub taxonomy_diploma: Option<PathBuf>,
    pub taxonomy_job: Option<PathBuf>,
    pub aliases: Option<PathBuf>,
    pub kind: Option<String>,
    pub method: Option<String>,
    pub alpha: Option<f64>,
    pub pack_size: Option<usize>,
    pub pack_penalty: Option<f64>,
    pub rank_mode: Option<String>,
    pub threshold: Option<usize>,
    pub seed: Option<u64>,
    pub users: Option<usize>,
    pub json: Option<bool>,
    pub jobs: Option<usize>,
    pub bind: Option<String>,
}

impl ConfigFile {
    pub fn from_toml_str(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Usage(format!("config: {e}")))
    }

    pub fn load(path: &std::path::Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }
}
