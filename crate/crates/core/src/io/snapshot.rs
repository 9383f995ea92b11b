//! Self-describing JSON checkpoints.
//!
//! A record carries the format tag and version, the grid, the config hash of
//! the run that wrote it, the solver state needed to continue bit-for-bit,
//! and the field values at full precision.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::diagnostics::FieldStats;
use crate::grid::RadialField;
use crate::scenarios::GridSpec;
use crate::stepper::RunState;
use crate::{Error, Result};

pub const SNAPSHOT_FORMAT: &str = "nldiff-snapshot";
pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    format: String,
    version: u32,
    config_hash: String,
    grid: GridSpec,
    step: usize,
    t: f64,
    dt: f64,
    clean_steps: u32,
    q_integral: f64,
    last_sq: f64,
    finished: bool,
    u0_stats: FieldStats,
    values: Vec<f64>,
}

pub fn emit_snapshot(state: &RunState, config_hash: &str) -> Result<String> {
    let grid = state.u.grid();
    let record = Record {
        format: SNAPSHOT_FORMAT.to_string(),
        version: SNAPSHOT_VERSION,
        config_hash: config_hash.to_string(),
        grid: GridSpec {
            kind: grid.kind(),
            n: grid.len(),
        },
        step: state.step,
        t: state.t,
        dt: state.dt,
        clean_steps: state.clean_steps,
        q_integral: state.q_integral,
        last_sq: state.last_sq,
        finished: state.finished,
        u0_stats: state.u0_stats.clone(),
        values: state.u.values().to_vec(),
    };
    Ok(serde_json::to_string_pretty(&record)?)
}

/// Parses a snapshot and checks it against the current config hash.
pub fn load_snapshot(text: &str, config_hash: &str) -> Result<RunState> {
    let raw: serde_json::Value =
        serde_json::from_str(text).map_err(|e| Error::CorruptSnapshot(e.to_string()))?;
    match raw.get("format").and_then(|f| f.as_str()) {
        Some(SNAPSHOT_FORMAT) => {}
        _ => {
            return Err(Error::CorruptSnapshot(
                "missing or unknown format tag".into(),
            ))
        }
    }
    let version = raw
        .get("version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| Error::CorruptSnapshot("missing version".into()))?;
    if version != SNAPSHOT_VERSION as u64 {
        return Err(Error::VersionMismatch {
            expected: SNAPSHOT_VERSION,
            found: version as u32,
        });
    }
    let record: Record =
        serde_json::from_value(raw).map_err(|e| Error::CorruptSnapshot(e.to_string()))?;
    if record.config_hash != config_hash {
        return Err(Error::HashMismatch {
            stored: record.config_hash,
            current: config_hash.to_string(),
        });
    }
    let grid = record
        .grid
        .build()
        .map_err(|e| Error::CorruptSnapshot(e.to_string()))?;
    if record.values.len() != grid.len() {
        return Err(Error::CorruptSnapshot(format!(
            "{} values for a {}-node grid",
            record.values.len(),
            grid.len()
        )));
    }
    let u = RadialField::new(Arc::clone(&grid), record.values)?;
    Ok(RunState {
        step: record.step,
        t: record.t,
        dt: record.dt,
        clean_steps: record.clean_steps,
        q_integral: record.q_integral,
        last_sq: record.last_sq,
        u0_stats: record.u0_stats,
        u,
        finished: record.finished,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_grid, DomainKind};

    fn state() -> RunState {
        let g = make_grid(DomainKind::WholeSpaceTruncated { radius: 8.0 }, 65).unwrap();
        let u = RadialField::from_fn(g, |r| (-r * r).exp() / 3.0);
        RunState {
            step: 7,
            t: 0.1 + 0.2,
            dt: 1.0 / 3.0,
            clean_steps: 3,
            q_integral: std::f64::consts::PI,
            last_sq: 1e-300,
            u0_stats: FieldStats::of(&u, 0.1, &[1.4]).unwrap(),
            u,
            finished: false,
        }
    }

    #[test]
    fn roundtrip_is_bit_identical() {
        let s = state();
        let text = emit_snapshot(&s, "abc").unwrap();
        let back = load_snapshot(&text, "abc").unwrap();
        assert_eq!(back, s);
        for (a, b) in back.u.values().iter().zip(s.u.values()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn hash_mismatch_is_reported() {
        let text = emit_snapshot(&state(), "abc").unwrap();
        assert!(matches!(
            load_snapshot(&text, "abd"),
            Err(Error::HashMismatch { .. })
        ));
    }

    #[test]
    fn version_mismatch_is_reported() {
        let text = emit_snapshot(&state(), "abc")
            .unwrap()
            .replace("\"version\": 1", "\"version\": 9");
        assert!(matches!(
            load_snapshot(&text, "abc"),
            Err(Error::VersionMismatch { found: 9, .. })
        ));
    }

    #[test]
    fn corrupt_records_are_rejected() {
        assert!(matches!(
            load_snapshot("{", "abc"),
            Err(Error::CorruptSnapshot(_))
        ));
        let text = emit_snapshot(&state(), "abc").unwrap();
        let truncated = text.replacen("\"values\": [", "\"values\": [1.0, ", 1);
        assert!(matches!(
            load_snapshot(&truncated, "abc"),
            Err(Error::CorruptSnapshot(_))
        ));
    }
}
