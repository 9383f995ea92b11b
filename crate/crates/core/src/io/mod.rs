//! Configuration documents, CSV time series, resumable snapshots and run
//! manifests.

pub mod config;
pub mod manifest;
pub mod snapshot;
pub mod timeseries;

pub use config::{emit_config, parse_config, RunConfig};
pub use manifest::RunManifest;
pub use snapshot::{emit_snapshot, load_snapshot, SNAPSHOT_VERSION};
pub use timeseries::{emit_timeseries, write_timeseries, TIMESERIES_COLUMNS};

use sha2::{Digest, Sha256};

/// Lowercase hex SHA-256.
pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "NLDIFF_OUT_DIR";
