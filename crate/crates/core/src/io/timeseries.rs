use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::diagnostics::Trajectory;
use crate::stepper::StepReport;
use crate::Result;

pub const TIMESERIES_COLUMNS: [&str; 15] = [
    "t",
    "dt",
    "l1",
    "l2",
    "l2pd",
    "linf",
    "mass_balance_residual",
    "picard_iters",
    "picard_ratio",
    "weighted_h2",
    "monotone_ok",
    "positive_ok",
    "potential_bounds_ok",
    "tail_ok",
    "status",
];

// Debug formatting of f64 is the shortest string that parses back exactly.
fn float(x: f64) -> String {
    format!("{x:?}")
}

fn flag(b: bool) -> String {
    if b { "1" } else { "0" }.to_string()
}

pub fn report_row(r: &StepReport) -> [String; 15] {
    [
        float(r.t),
        float(r.dt),
        float(r.stats.l1),
        float(r.stats.l2),
        float(r.stats.l2pd),
        float(r.stats.linf),
        float(r.mass_balance_residual),
        r.picard_iters.to_string(),
        float(r.picard_ratio),
        float(r.stats.weighted_h2),
        flag(r.monotone_ok),
        flag(r.positive_ok),
        flag(r.potential_bounds_ok),
        flag(r.tail_ok),
        r.status.as_str().to_string(),
    ]
}

/// Writes the header and one row per step report.
pub fn write_timeseries<W: Write>(traj: &Trajectory, out: W) -> Result<()> {
    write_rows(std::iter::empty(), traj, out)
}

/// Writes `prefix` rows verbatim ahead of the trajectory's own rows.
pub fn write_rows<W: Write>(
    prefix: impl IntoIterator<Item = Vec<String>>,
    traj: &Trajectory,
    out: W,
) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(TIMESERIES_COLUMNS)?;
    for row in prefix {
        w.write_record(&row)?;
    }
    for r in &traj.reports {
        w.write_record(report_row(r))?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_timeseries(traj: &Trajectory, path: &Path) -> Result<()> {
    let file = BufWriter::new(File::create(path)?);
    write_timeseries(traj, file)
}

/// Rows of an existing time series with `t ≤ t_max`, kept as text.
pub fn read_rows_upto(path: &Path, t_max: f64) -> Result<Vec<Vec<String>>> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let t: f64 = rec.get(0).and_then(|s| s.parse().ok()).ok_or_else(|| {
            crate::Error::Config(format!("bad time column in {}", path.display()))
        })?;
        if t <= t_max {
            rows.push(rec.iter().map(str::to_string).collect());
        }
    }
    Ok(rows)
}
