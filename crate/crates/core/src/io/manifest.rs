use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::io::sha256_hex;
use crate::Result;

pub const MANIFEST_VERSION: &str = "1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    pub path: String,
    pub sha256: String,
}

impl OutputFile {
    pub fn hashed(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        Ok(Self {
            path: path.display().to_string(),
            sha256: sha256_hex(&bytes),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TerminalStatus {
    pub status: String,
    pub reason: String,
    pub wall_clock_seconds: f64,
}

/// Record of one invocation: what was run, what it wrote, how it ended.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    /// Canonical TOML of the run configuration.
    pub config: String,
    pub config_hash: String,
    pub outputs: Vec<OutputFile>,
    pub terminal_status: TerminalStatus,
}

impl RunManifest {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_roundtrip() {
        let m = RunManifest {
            version: MANIFEST_VERSION.into(),
            config: "alpha = 0.4\n".into(),
            config_hash: sha256_hex(b"alpha = 0.4\n"),
            outputs: vec![OutputFile {
                path: "out/timeseries.csv".into(),
                sha256: sha256_hex(b""),
            }],
            terminal_status: TerminalStatus {
                status: "Ok".into(),
                reason: String::new(),
                wall_clock_seconds: 0.125,
            },
        };
        assert_eq!(RunManifest::from_json(&m.to_json().unwrap()).unwrap(), m);
    }
}
