//! Optional TOML config file. Values here sit between environment variables
//! and built-in defaults.

use std::path::Path;

use anyhow::Context;
use revstream::scope::Backend;
use revstream::{Mode, Profile};
use serde::Deserialize;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub profile: Option<Profile>,
    pub mode: Option<Mode>,
    #[serde(default)]
    pub build_data: BuildDataFile,
    #[serde(default)]
    pub simulate: SimulateFile,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct BuildDataFile {
    pub tier: Option<String>,
    pub latency_k: Option<usize>,
    pub merge_gap: Option<usize>,
    pub lambda: Option<String>,
    pub workers: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct SimulateFile {
    pub bias: Option<f64>,
    pub mask: Option<bool>,
    #[serde(rename = "L")]
    pub context_len: Option<u64>,
    pub backend: Option<Backend>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}
