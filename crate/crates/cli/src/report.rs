use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use iuws_core::RunConfig;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliResult;

/// JSON report written by every solver subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    /// The configuration after command-line overrides, in physical units.
    pub config: RunConfig,
    /// Subcommand-specific results, in physical units.
    pub results: Value,
    /// CSV field dumps written alongside the report.
    pub files: Vec<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generated_unix: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub runtime_s: Option<f64>,
}

impl RunReport {
    pub fn to_json(&self) -> CliResult<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub(crate) fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}
