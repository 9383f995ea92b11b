use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use nonlocal_diffusion::io::{RunManifest, TIMESERIES_COLUMNS};

fn nldiff(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nldiff"))
        .args(args)
        .args(["--quiet", "--out"])
        .arg(out)
        .output()
        .expect("spawn nldiff")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

const SMALL: &str = "alpha = 0.4\nn = 129\nt_end = 0.3\nsnapshot_stride = 10\n";

#[test]
fn malformed_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    for text in [
        "alpha = [",
        "alpha = 0.4\nmystery = 1\n",
        "family = \"gaussian\"\n",
        "alpha = 0.4\nfamily = \"bump\"\nwidth = 2.0\n",
    ] {
        let cfg = write(dir.path(), "bad.toml", text);
        let out = nldiff(dir.path(), &["--config", &cfg, "run"]);
        assert_eq!(out.status.code(), Some(2), "{text:?}");
    }
    let out = nldiff(dir.path(), &["--config", "/nonexistent/config.toml", "run"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn run_writes_series_snapshot_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.toml", SMALL);
    let out_dir = dir.path().join("out");
    let out = nldiff(&out_dir, &["--config", &cfg, "run"]);
    assert_eq!(out.status.code(), Some(0));

    let csv = fs::read_to_string(out_dir.join("timeseries.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), TIMESERIES_COLUMNS.join(","));
    assert!(lines.all(|l| l.split(',').count() == 15));

    let manifest =
        RunManifest::from_json(&fs::read_to_string(out_dir.join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest.outputs.len(), 3);
    assert_eq!(manifest.terminal_status.status, "Ok");
    for file in &manifest.outputs {
        let bytes = fs::read(&file.path).unwrap();
        assert_eq!(nonlocal_diffusion::io::sha256_hex(&bytes), file.sha256);
    }
}

#[test]
fn interrupted_run_resumes_to_identical_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.toml", SMALL);
    let whole = dir.path().join("whole");
    let split = dir.path().join("split");
    assert!(nldiff(&whole, &["--config", &cfg, "run"]).status.success());
    assert!(
        nldiff(&split, &["--config", &cfg, "run", "--stop-after", "25"])
            .status
            .success()
    );
    assert!(nldiff(&split, &["--config", &cfg, "run", "--resume"])
        .status
        .success());
    assert_eq!(
        fs::read(whole.join("timeseries.csv")).unwrap(),
        fs::read(split.join("timeseries.csv")).unwrap()
    );

    let again = nldiff(&split, &["--config", &cfg, "run", "--resume"]);
    assert!(again.status.success());
    assert!(String::from_utf8_lossy(&again.stdout).contains("already complete"));
}

#[test]
fn resume_with_edited_config_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.toml", SMALL);
    let out_dir = dir.path().join("out");
    assert!(
        nldiff(&out_dir, &["--config", &cfg, "run", "--stop-after", "5"])
            .status
            .success()
    );
    let edited = write(dir.path(), "edited.toml", &SMALL.replace("0.4", "0.45"));
    let out = nldiff(&out_dir, &["--config", &edited, "run", "--resume"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("hash"));
}

#[test]
fn sweep_marks_open_regime_observational() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.toml", SMALL);
    let out_dir = dir.path().join("sweep");
    let out = nldiff(
        &out_dir,
        &["--config", &cfg, "sweep", "--alphas", "0.4,0.8,1.5"],
    );
    assert_eq!(out.status.code(), Some(0));
    let table = String::from_utf8_lossy(&out.stdout);
    assert_eq!(table.lines().count(), 3);
    assert!(table.lines().nth(1).unwrap().contains("observational"));
    for a in ["0.4", "0.8", "1.5"] {
        assert!(out_dir
            .join(format!("alpha_{a}"))
            .join("timeseries.csv")
            .exists());
    }
}

#[test]
fn converge_reports_orders() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.toml", "alpha = 0.4\nradius = 6.0\n");
    let out = nldiff(
        dir.path(),
        &[
            "--config",
            &cfg,
            "converge",
            "--axis",
            "space",
            "--levels",
            "4",
            "--n0",
            "49",
            "--dt0",
            "1e-3",
            "--t-probe",
            "0.05",
            "--min-order",
            "1.5",
        ],
    );
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{text}");
    assert!(text.contains("observed orders"));
}
