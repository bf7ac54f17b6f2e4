use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::Result;
use crate::output::write_bytes;

/// Provenance record written next to every output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub params: Value,
    pub seed: Option<u64>,
    pub version: String,
    /// Quantities computed on the way, e.g. the amplitudes a run settled on.
    pub derived: Value,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
}

impl RunManifest {
    pub fn new(command: &str, params: Value, seed: Option<u64>) -> Self {
        Self {
            command: command.to_string(),
            params,
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            derived: Value::Object(Default::default()),
            timestamp: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
        }
    }

    pub fn derive(&mut self, key: &str, value: impl Serialize) -> Result<()> {
        if let Value::Object(map) = &mut self.derived {
            map.insert(key.to_string(), serde_json::to_value(value)?);
        }
        Ok(())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        write_bytes(path, text.as_bytes())
    }
}

/// Sidecar manifest path for an output file: `out.csv` -> `out.csv.manifest.json`.
pub fn sidecar_path(output: &Path) -> PathBuf {
    let mut name = output.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    output.with_file_name(name)
}
