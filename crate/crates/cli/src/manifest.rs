use std::path::Path;

use equilens::engine::stable_hash;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";

/// What a run directory needs to be replayed: the resolved config (seed
/// overrides applied) and the versions it ran under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub code_version: String,
    pub seed: u64,
    pub template_version: String,
    /// FNV-1a of the compact JSON form of `config`, as 16 hex digits.
    pub config_hash: String,
    pub config: serde_json::Value,
}

impl Manifest {
    pub fn new<T: Serialize>(command: &str, seed: u64, template_version: &str, config: &T) -> Result<Self, CliError> {
        let config = serde_json::to_value(config).map_err(CliError::runtime)?;
        let canonical = serde_json::to_string(&config).map_err(CliError::runtime)?;
        Ok(Manifest {
            command: command.into(),
            code_version: env!("CARGO_PKG_VERSION").into(),
            seed,
            template_version: template_version.into(),
            config_hash: format!("{:016x}", stable_hash(&canonical)),
            config,
        })
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(self).map_err(CliError::runtime)?;
        std::fs::write(dir.join(MANIFEST_FILE), text + "\n").map_err(|e| CliError::Runtime(format!("{}: {e}", dir.display())))
    }
}
