use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};

use nonlocal_diffusion::io::manifest::{OutputFile, TerminalStatus, MANIFEST_VERSION};
use nonlocal_diffusion::io::timeseries::{read_rows_upto, write_rows};
use nonlocal_diffusion::io::{
    emit_config, emit_snapshot, emit_timeseries, load_snapshot, parse_config, RunConfig,
    RunManifest, OUT_DIR_ENV,
};
use nonlocal_diffusion::scenarios::{
    convergence_study, make_initial, run_regime_sweep, ConvergenceSetup, InitialDataSpec,
    RefinementAxis, SweepSpec,
};
use nonlocal_diffusion::stepper::{run_with, RunOptions, RunState};
use nonlocal_diffusion::{verify, Error, RunStatus, Trajectory};

const TIMESERIES_FILE: &str = "timeseries.csv";
const SNAPSHOT_FILE: &str = "snapshot.json";
const CONFIG_FILE: &str = "config.toml";
const MANIFEST_FILE: &str = "manifest.json";

/// Radial solver for u_t = ((-Δ)^-1 u) Δu + α u² in three dimensions.
#[derive(Parser)]
#[command(name = "nldiff", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; defaults to α = 0.4 with Gaussian data.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, env = OUT_DIR_ENV, default_value = "nldiff-out")]
    out: PathBuf,
    /// Suppress progress messages.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its time series, snapshot and manifest.
    Run {
        /// Continue from the snapshot in the output directory.
        #[arg(long)]
        resume: bool,
        /// Stop after this many steps in total (the run can be resumed later).
        #[arg(long)]
        stop_after: Option<usize>,
    },
    /// Run the configured scenario for several values of α.
    Sweep {
        #[arg(long, value_delimiter = ',', required = true)]
        alphas: Vec<f64>,
    },
    /// Run the acceptance checks and print a table.
    Verify,
    /// Measure observed convergence orders under refinement.
    Converge {
        #[arg(long, value_enum, default_value_t = Axis::Joint)]
        axis: Axis,
        #[arg(long, default_value_t = 4)]
        levels: usize,
        /// Time at which levels are compared.
        #[arg(long, default_value_t = 0.1)]
        t_probe: f64,
        /// Nodes on the coarsest level.
        #[arg(long, default_value_t = 65)]
        n0: usize,
        /// Step on the coarsest level.
        #[arg(long, default_value_t = 1e-2)]
        dt0: f64,
        /// Fail unless the observed order reaches this value.
        #[arg(long)]
        min_order: Option<f64>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Axis {
    Space,
    Time,
    Joint,
}

impl From<Axis> for RefinementAxis {
    fn from(a: Axis) -> Self {
        match a {
            Axis::Space => RefinementAxis::Space,
            Axis::Time => RefinementAxis::Time,
            Axis::Joint => RefinementAxis::Joint,
        }
    }
}

/// Failures split by exit code: bad input (2) versus everything else (1).
enum Failure {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_)
            | Error::InvalidParameter { .. }
            | Error::BallRadius(_)
            | Error::BadRadius(_)
            | Error::TooFewNodes { .. }
            | Error::VersionMismatch { .. }
            | Error::HashMismatch { .. }
            | Error::CorruptSnapshot(_) => Failure::Config(e.into()),
            other => Failure::Runtime(other.into()),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

type Outcome = Result<bool, Failure>;

struct Progress {
    quiet: bool,
}

impl Progress {
    fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<RunConfig, Failure> {
    let Some(path) = path else {
        return Ok(RunConfig::new(0.4, InitialDataSpec::gaussian(1.0)));
    };
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(Failure::Config)?;
    Ok(parse_config(&text)?)
}

fn write_manifest(
    dir: &Path,
    cfg: &RunConfig,
    outputs: &[PathBuf],
    status: &str,
    reason: &str,
    started: Instant,
) -> anyhow::Result<()> {
    let manifest = RunManifest {
        version: MANIFEST_VERSION.to_string(),
        config: emit_config(cfg),
        config_hash: cfg.hash(),
        outputs: outputs
            .iter()
            .map(|p| OutputFile::hashed(p))
            .collect::<Result<_, _>>()?,
        terminal_status: TerminalStatus {
            status: status.to_string(),
            reason: reason.to_string(),
            wall_clock_seconds: started.elapsed().as_secs_f64(),
        },
    };
    fs::write(dir.join(MANIFEST_FILE), manifest.to_json()?)?;
    Ok(())
}

/// A run is healthy unless the truncation or positivity checks were violated;
/// divergence is a result, not a failure.
fn healthy(traj: &Trajectory) -> bool {
    traj.status != RunStatus::TailBreach && traj.reports.iter().all(|r| r.positive_ok)
}

fn cmd_run(common: &Common, resume: bool, stop_after: Option<usize>, say: &Progress) -> Outcome {
    let started = Instant::now();
    let cfg = load_config(common.config.as_deref())?;
    let hash = cfg.hash();
    let dir = &common.out;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let snapshot_path = dir.join(SNAPSHOT_FILE);
    let csv_path = dir.join(TIMESERIES_FILE);

    let resumed: Option<RunState> = if resume {
        let text = fs::read_to_string(&snapshot_path)
            .with_context(|| format!("reading {}", snapshot_path.display()))
            .map_err(Failure::Config)?;
        Some(load_snapshot(&text, &hash)?)
    } else {
        None
    };
    if let Some(state) = resumed.as_ref().filter(|s| s.finished) {
        println!("run already complete at t = {}; nothing to do", state.t);
        return Ok(true);
    }
    let prefix = match &resumed {
        Some(state) => read_rows_upto(&csv_path, state.t)?,
        None => Vec::new(),
    };

    let grid = cfg.grid.build()?;
    let u0 = make_initial(&cfg.data, &grid, cfg.solver.delta)?.field;
    fs::write(dir.join(CONFIG_FILE), emit_config(&cfg)).context("writing config")?;

    let mut checkpoint = |state: &RunState| -> nonlocal_diffusion::Result<()> {
        fs::write(&snapshot_path, emit_snapshot(state, &hash)?)?;
        say.say(format!("step {:>7}  t = {:.6}", state.step, state.t));
        Ok(())
    };
    say.say(format!(
        "running α = {} on the {} domain with {} nodes",
        cfg.solver.alpha,
        cfg.grid.kind.name(),
        cfg.grid.n
    ));
    let traj = run_with(
        &u0,
        &cfg.solver,
        RunOptions {
            resume: resumed,
            stop_after,
            on_checkpoint: Some(&mut checkpoint),
        },
    )?;

    let file = fs::File::create(&csv_path).context("creating time series")?;
    write_rows(prefix, &traj, BufWriter::new(file))?;
    write_manifest(
        dir,
        &cfg,
        &[
            dir.join(CONFIG_FILE),
            csv_path.clone(),
            snapshot_path.clone(),
        ],
        traj.status.as_str(),
        &traj.reason,
        started,
    )?;
    for w in &traj.warnings {
        eprintln!("warning: {w}");
    }
    println!(
        "status {} at t = {}{}",
        traj.status.as_str(),
        traj.final_time(),
        if traj.reason.is_empty() {
            String::new()
        } else {
            format!(" ({})", traj.reason)
        }
    );
    Ok(healthy(&traj))
}

fn cmd_sweep(common: &Common, alphas: Vec<f64>, say: &Progress) -> Outcome {
    let started = Instant::now();
    let cfg = load_config(common.config.as_deref())?;
    let spec = SweepSpec {
        alphas,
        data: cfg.data.clone(),
        grid: cfg.grid,
        solver: cfg.solver.clone(),
        gamma: cfg.gamma,
    };
    say.say(format!("sweeping {} values of α", spec.alphas.len()));
    let entries = run_regime_sweep(&spec)?;
    let mut all_pass = true;
    for entry in &entries {
        let dir = common.out.join(format!("alpha_{}", entry.alpha));
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        let csv_path = dir.join(TIMESERIES_FILE);
        emit_timeseries(&entry.trajectory, &csv_path)?;
        let entry_cfg = RunConfig {
            solver: entry.trajectory.config.clone(),
            ..cfg.clone()
        };
        fs::write(dir.join(CONFIG_FILE), emit_config(&entry_cfg)).context("writing config")?;
        let traj = &entry.trajectory;
        write_manifest(
            &dir,
            &entry_cfg,
            &[dir.join(CONFIG_FILE), csv_path],
            traj.status.as_str(),
            &traj.reason,
            started,
        )?;
        let verdict = match entry.verdict.passed() {
            Some(true) => "pass",
            Some(false) => {
                all_pass = false;
                "FAIL"
            }
            None => "observational",
        };
        println!(
            "α = {:<6} {:<12} {:<13} status {} at t = {}",
            entry.alpha,
            entry.verdict.label(),
            verdict,
            traj.status.as_str(),
            traj.final_time()
        );
    }
    Ok(all_pass)
}

fn cmd_verify(say: &Progress) -> Outcome {
    say.say("running acceptance checks");
    let outcomes = verify::run_all()?;
    for o in &outcomes {
        println!("{o}");
    }
    let passed = outcomes.iter().filter(|o| o.pass).count();
    println!("{passed}/{} checks passed", outcomes.len());
    Ok(passed == outcomes.len())
}

#[allow(clippy::too_many_arguments)]
fn cmd_converge(
    common: &Common,
    axis: Axis,
    levels: usize,
    t_probe: f64,
    n0: usize,
    dt0: f64,
    min_order: Option<f64>,
    say: &Progress,
) -> Outcome {
    let cfg = load_config(common.config.as_deref())?;
    let setup = ConvergenceSetup {
        domain: cfg.grid.kind,
        n0,
        dt0,
        axis: axis.into(),
    };
    say.say(format!("solving {levels} levels to t = {t_probe}"));
    let table = convergence_study(&cfg.data, cfg.solver.alpha, t_probe, levels, &setup)?;
    println!("{:>12} {:>12} {:>14}", "h", "dt", "error");
    for row in &table.rows {
        println!("{:>12.4e} {:>12.4e} {:>14.6e}", row.h, row.dt, row.error);
    }
    let orders: Vec<String> = table.orders.iter().map(|p| format!("{p:.3}")).collect();
    println!("observed orders: {}", orders.join(", "));
    Ok(min_order.is_none_or(|p| table.observed_order() >= p))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let say = Progress {
        quiet: cli.common.quiet,
    };
    let outcome = match cli.command {
        Command::Run { resume, stop_after } => cmd_run(&cli.common, resume, stop_after, &say),
        Command::Sweep { alphas } => cmd_sweep(&cli.common, alphas, &say),
        Command::Verify => cmd_verify(&say),
        Command::Converge {
            axis,
            levels,
            t_probe,
            n0,
            dt0,
            min_order,
        } => cmd_converge(&cli.common, axis, levels, t_probe, n0, dt0, min_order, &say),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Config(e)) => {
            eprintln!("config error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
