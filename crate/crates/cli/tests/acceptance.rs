//! The eleven acceptance criteria. Runs without the libtest harness so every
//! criterion prints its PASS/FAIL line even when everything passes; the
//! process exits non-zero if any criterion fails.

use std::path::Path;
use std::process::{Command, ExitCode};

use nonlocal_diffusion::verify::{self, CriterionOutcome};

fn nldiff(out: &Path, args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_nldiff"))
        .args(args)
        .arg("--quiet")
        .env("NLDIFF_OUT_DIR", out)
        .output()
        .expect("spawn nldiff")
}

/// The binary-level half of criterion 11: `verify` exits 0 and repeated
/// sweeps write byte-identical CSVs.
fn cli_determinism() -> (bool, String) {
    let dir = tempfile::tempdir().expect("temp dir");
    let verify_run = nldiff(dir.path(), &["verify"]);
    let table = String::from_utf8_lossy(&verify_run.stdout);
    let verify_ok = verify_run.status.code() == Some(0) && table.matches("[PASS]").count() == 11;
    if !verify_ok {
        eprintln!("nldiff verify output:\n{table}");
    }

    let config = dir.path().join("sweep.toml");
    std::fs::write(&config, "alpha = 0.4\nn = 257\nt_end = 0.2\n").expect("write config");
    let config = config.to_str().expect("utf-8 path");
    let mut written = Vec::new();
    for name in ["first", "second"] {
        let out = dir.path().join(name);
        let run = nldiff(&out, &["--config", config, "sweep", "--alphas", "0.4,0.6"]);
        let csvs: Vec<_> = ["alpha_0.4", "alpha_0.6"]
            .iter()
            .map(|a| std::fs::read(out.join(a).join("timeseries.csv")).ok())
            .collect();
        written.push((run.status.code(), csvs));
    }
    let sweep_ok = written[0].0 == Some(0)
        && written[0].1.iter().all(Option::is_some)
        && written[0] == written[1];
    (
        verify_ok && sweep_ok,
        format!("verify exit 0 with 11 passes {verify_ok}, sweep CSV bytes identical {sweep_ok}"),
    )
}

fn main() -> ExitCode {
    let library: Vec<CriterionOutcome> = match verify::run_all() {
        Ok(outcomes) => outcomes,
        Err(e) => {
            println!("[FAIL] acceptance suite could not run: {e}");
            return ExitCode::FAILURE;
        }
    };
    let mut failed = 0;
    for outcome in &library {
        println!("{outcome}");
        failed += usize::from(!outcome.pass);
    }
    let (pass, detail) = cli_determinism();
    println!(
        "[{}] 11 determinism (CLI)        {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    failed += usize::from(!pass);

    println!(
        "acceptance: {} of {} checks passed",
        library.len() + 1 - failed,
        library.len() + 1
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
