//! Run manifests: every run writes one, pass or fail, atomically at the
//! end.

use serde::Serialize;
use std::path::Path;

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub experiment: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub wall_time_s: f64,
    pub outputs: Vec<String>,
    pub checks: Vec<CheckResult>,
    /// "ok", "check_failed", "config_error" or "numeric_error".
    pub status: String,
    pub error: Option<String>,
}

impl RunManifest {
    /// Write to `dir/manifest.json` via a temporary file and rename.
    pub fn write_atomic(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        let tmp = dir.join("manifest.json.tmp");
        let txt = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(&tmp, txt)?;
        std::fs::rename(&tmp, dir.join("manifest.json"))
    }
}
