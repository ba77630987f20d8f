use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::cli::Command;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub name: String,
    pub seconds: f64,
}

/// Record of one run. The config snapshot is the canonical text of the
/// configuration actually used, so a replay does not need the original file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: Command,
    pub argv: Vec<String>,
    pub config_source: Option<String>,
    /// How bare frequencies on the command line were read.
    pub bare_frequency: String,
    pub config: String,
    pub workers: usize,
    pub outputs: Vec<String>,
    pub warnings: Vec<String>,
    pub exit_code: i32,
    pub wall_time_s: f64,
    pub stages: Vec<Stage>,
}

impl RunManifest {
    pub fn read(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        let mut text = serde_json::to_string_pretty(self).map_err(std::io::Error::other)?;
        text.push('\n');
        std::fs::write(path, text)
    }
}

pub fn seconds(d: Duration) -> f64 {
    d.as_secs_f64()
}
