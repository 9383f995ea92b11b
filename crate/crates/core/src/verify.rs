//! The acceptance suite: eleven self-contained checks that build their own
//! grids and data, run the solver and compare against closed forms or
//! refinement behaviour.
//!
//! Every check returns a [`CriterionOutcome`] rather than panicking so the CLI
//! can print a table and the test harness can assert on each line.

use std::fmt;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::diagnostics::{
    ball_minorant_margin, decay_tracker, mass_balance_residual, max_growth, potential_bounds_check,
    shell_mass, Trajectory,
};
use crate::grid::{make_grid, DomainKind, RadialField, RadialGrid};
use crate::io::{emit_snapshot, load_snapshot, write_timeseries, RunConfig};
use crate::operators::{
    inverse_laplacian, inverse_laplacian_ball, inverse_laplacian_free, potential_roundtrip_residual,
};
use crate::scenarios::{make_initial, run_regime_sweep, GridSpec, InitialDataSpec, SweepSpec};
use crate::stepper::{run, run_with, step_frozen, RunOptions, RunStatus, SolverConfig};
use crate::Result;

/// Result of one acceptance check.
#[derive(Clone, Debug, PartialEq)]
pub struct CriterionOutcome {
    pub id: u8,
    pub name: &'static str,
    /// Human-readable measured quantities.
    pub measured: String,
    /// What the measurement is compared against.
    pub threshold: String,
    pub pass: bool,
    pub elapsed: Duration,
}

impl fmt::Display for CriterionOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {:>2} {:<26} {} (need {}) in {:.2?}",
            if self.pass { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.measured,
            self.threshold,
            self.elapsed
        )
    }
}

struct Pending {
    id: u8,
    name: &'static str,
    budget: Option<Duration>,
    started: Instant,
}

impl Pending {
    fn new(id: u8, name: &'static str, budget: Option<Duration>) -> Self {
        Self {
            id,
            name,
            budget,
            started: Instant::now(),
        }
    }

    fn finish(self, measured: String, threshold: String, pass: bool) -> CriterionOutcome {
        let elapsed = self.started.elapsed();
        let (threshold, pass) = match self.budget {
            Some(b) => (format!("{threshold}; runtime < {b:?}"), pass && elapsed < b),
            None => (threshold, pass),
        };
        CriterionOutcome {
            id: self.id,
            name: self.name,
            measured,
            threshold,
            pass,
            elapsed,
        }
    }
}

fn free_grid(n: usize, radius: f64) -> Result<std::sync::Arc<RadialGrid>> {
    make_grid(DomainKind::WholeSpaceTruncated { radius }, n)
}

fn node(grid: &RadialGrid, r: f64) -> usize {
    (r / grid.spacing()).round() as usize
}

/// Worst error of the unit-indicator potential at `r = 0, 1, 2`.
fn indicator_error(n: usize) -> Result<f64> {
    let grid = free_grid(n, 4.0)?;
    let p = inverse_laplacian_free(&RadialField::indicator(grid.clone(), 1.0))?;
    let exact = [(0.0, 0.5), (1.0, 1.0 / 3.0), (2.0, 1.0 / 6.0)];
    Ok(exact
        .iter()
        .map(|&(r, v)| (p.phi[node(&grid, r)] - v).abs())
        .fold(0.0, f64::max))
}

pub fn operator_exactness() -> Result<CriterionOutcome> {
    let pending = Pending::new(1, "operator exactness", Some(Duration::from_secs(1)));
    let errors = [
        indicator_error(1025)?,
        indicator_error(2049)?,
        indicator_error(4097)?,
    ];
    let orders: Vec<f64> = errors.windows(2).map(|e| (e[0] / e[1]).log2()).collect();
    let pass = errors[2] <= 1e-4 && orders.iter().all(|p| (1.8..=2.2).contains(p));
    Ok(pending.finish(
        format!(
            "err {:.3e} at n=4097, orders {:.3}/{:.3}",
            errors[2], orders[0], orders[1]
        ),
        "err ≤ 1e-4, order in [1.8, 2.2]".into(),
        pass,
    ))
}

pub fn roundtrip() -> Result<CriterionOutcome> {
    let pending = Pending::new(2, "Laplacian roundtrip", None);
    let residual = |n| -> Result<f64> {
        let u = RadialField::from_fn(free_grid(n, 8.0)?, |r| (-r * r).exp());
        Ok(potential_roundtrip_residual(&u))
    };
    let coarse = residual(1025)?;
    let fine = residual(2049)?;
    let ratio = coarse / fine;
    let pass = coarse <= 1e-3 && (4.0 / 1.5..=4.0 * 1.5).contains(&ratio);
    Ok(pending.finish(
        format!("residual {coarse:.3e}, doubling ratio {ratio:.3}"),
        "≤ 1e-3, ratio in [2.67, 6]".into(),
        pass,
    ))
}

pub fn ball_green_function() -> Result<CriterionOutcome> {
    let pending = Pending::new(3, "ball Green's function", None);
    let grid = make_grid(DomainKind::Ball, 2049)?;
    let p = inverse_laplacian_ball(&RadialField::constant(grid.clone(), 1.0))?;
    let err = grid
        .nodes()
        .iter()
        .zip(&p.phi)
        .map(|(&r, &phi)| (phi - (1.0 - r * r) / 6.0).abs())
        .fold(0.0, f64::max);
    Ok(pending.finish(format!("max error {err:.3e}"), "≤ 1e-6".into(), err <= 1e-6))
}

/// The α = 0.4 Gaussian run shared by checks 4, 5, 6 and 8.
pub fn reference_run(dt: f64) -> Result<Trajectory> {
    let grid = free_grid(1025, 8.0)?;
    let cfg = SolverConfig::fixed_step(0.4, dt, 1.0);
    let u0 = make_initial(&InitialDataSpec::gaussian(1.0), &grid, cfg.delta)?.field;
    run(&u0, &cfg)
}

pub fn mass_identity(traj: &Trajectory) -> Result<CriterionOutcome> {
    let pending = Pending::new(4, "mass identity", Some(Duration::from_secs(30)));
    let halved = reference_run(0.5 * traj.config.dt0)?;
    let coarse = mass_balance_residual(traj, 1.0)?;
    let fine = mass_balance_residual(&halved, 1.0)?;
    let ratio = coarse / fine;
    let complete = traj.status == RunStatus::Ok && halved.status == RunStatus::Ok;
    let pass = complete && coarse <= 1e-3 && (2.0 / 1.5..=2.0 * 1.5).contains(&ratio);
    Ok(pending.finish(
        format!("residual {coarse:.3e}, dt-halving ratio {ratio:.3}"),
        "≤ 1e-3, ratio in [1.33, 3]".into(),
        pass,
    ))
}

pub fn decay_regime(traj: &Trajectory) -> Result<CriterionOutcome> {
    let pending = Pending::new(5, "decay for α < 1/2", None);
    let q = 2.0 + traj.config.delta;
    let lp = decay_tracker(traj, q)?;
    let l2 = decay_tracker(traj, 2.0)?;
    let flags = traj.reports.iter().all(|r| r.positive_ok && r.monotone_ok);
    let pass = traj.status == RunStatus::Ok
        && lp.monotone_after_burnin
        && l2.monotone_after_burnin
        && flags;
    Ok(pending.finish(
        format!(
            "L^{q} ratio {:.4}, L^2 ratio {:.4}, flags {}",
            lp.terminal_ratio, l2.terminal_ratio, flags
        ),
        "non-increasing after burn-in, flags true".into(),
        pass,
    ))
}

pub fn potential_bounds(traj: &Trajectory) -> Result<CriterionOutcome> {
    let pending = Pending::new(6, "potential bounds", None);
    let grid = free_grid(1025, 8.0)?;
    let u0 = make_initial(&InitialDataSpec::gaussian(1.0), &grid, traj.config.delta)?.field;
    let r0 = traj.config.r0;
    let initial = potential_bounds_check(&u0, r0, shell_mass(&u0, r0))?.d2_est;
    let all_ok = traj.reports.iter().all(|r| r.potential_bounds_ok);
    let lowest = traj
        .reports
        .iter()
        .map(|r| r.d2_est)
        .fold(initial, f64::min);
    Ok(pending.finish(
        format!("bounds ok {all_ok}, min D2 {lowest:.4} vs initial {initial:.4}"),
        "ok every step, min D2 ≥ D2(0)/2".into(),
        all_ok && lowest >= 0.5 * initial,
    ))
}

pub fn ball_blowup() -> Result<CriterionOutcome> {
    let pending = Pending::new(7, "ball blow-up", Some(Duration::from_secs(60)));
    let grid = make_grid(DomainKind::Ball, 1025)?;
    let cfg = SolverConfig {
        alpha: 1.5,
        t_end: 10.0,
        ..SolverConfig::default()
    };
    let u0 = make_initial(&InitialDataSpec::parabola(), &grid, cfg.delta)?.field;
    let traj = run(&u0, &cfg)?;
    let margin = ball_minorant_margin(&traj, 1e-6)?;
    let t_div = traj.divergence_time();
    let pass = t_div.is_some_and(|t| t < 5.1) && margin >= 0.0;
    let shown = t_div.map_or("none".to_string(), |t| format!("{t:.4}"));
    Ok(pending.finish(
        format!("t_div {shown}, minorant slack {margin:.3e}"),
        "t_div < 5.1, slack ≥ 0".into(),
        pass,
    ))
}

pub fn picard_contraction(traj: &Trajectory) -> Result<CriterionOutcome> {
    let pending = Pending::new(8, "Picard contraction", None);
    let first: Vec<_> = traj.reports.iter().take(100).collect();
    let contracting = first.iter().filter(|r| r.picard_ratio < 0.5).count();
    let share = contracting as f64 / first.len().max(1) as f64;
    let pass = first.len() == 100 && traj.config.dt_max <= 1e-3 && share >= 0.99;
    Ok(pending.finish(
        format!("{contracting}/{} steps with ratio < 1/2", first.len()),
        "≥ 99%".into(),
        pass,
    ))
}

pub fn m_matrix_positivity() -> Result<CriterionOutcome> {
    let pending = Pending::new(9, "M-matrix positivity", None);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut worst = f64::INFINITY;
    for trial in 0..1000 {
        let n = rng.gen_range(8..=200);
        let grid = if trial % 2 == 0 {
            free_grid(n, rng.gen_range(0.5..20.0))?
        } else {
            make_grid(DomainKind::Ball, n)?
        };
        let scale = 10f64.powf(rng.gen_range(-3.0..3.0));
        let values = (0..n).map(|_| scale * rng.gen_range(1e-6..1.0)).collect();
        let u = RadialField::new(grid.clone(), values)?;
        let values = (0..n).map(|_| rng.gen_range(0.0..5.0)).collect();
        let source = RadialField::new(grid.clone(), values)?;
        let mut phi = inverse_laplacian(&source);
        for p in &mut phi.phi {
            *p = *p * rng.gen_range(0.5..2.0) + rng.gen_range(0.0..1.0);
        }
        let dt = 10f64.powf(rng.gen_range(-5.0..-1.0));
        let alpha = rng.gen_range(0.0..2.0);
        let w = step_frozen(&u, &phi, dt, alpha)?;
        worst = worst.min(w.min() / u.max());
    }
    Ok(pending.finish(
        format!("min output / max input {worst:.3e}"),
        "≥ -1e-12".into(),
        worst >= -1e-12,
    ))
}

pub fn bounded_regime() -> Result<CriterionOutcome> {
    let pending = Pending::new(10, "bounds for α in [1/2, 2/3)", None);
    let grid = free_grid(1025, 8.0)?;
    let cfg = SolverConfig {
        alpha: 0.6,
        t_end: 2.0,
        ladder: vec![1.4, 1.55],
        ..SolverConfig::default()
    };
    let u0 = make_initial(&InitialDataSpec::gaussian(1.0), &grid, cfg.delta)?.field;
    let traj = run(&u0, &cfg)?;
    let growth = max_growth(&traj, 1.55)?;
    let trend = decay_tracker(&traj, 1.4)?;
    let pass = traj.status == RunStatus::Ok && growth <= 2.0 && trend.monotone_after_burnin;
    Ok(pending.finish(
        format!(
            "max L^1.55 growth {growth:.4}, L^1.4 ratio {:.4}, monotone {}",
            trend.terminal_ratio, trend.monotone_after_burnin
        ),
        "growth ≤ 2, L^1.4 non-increasing".into(),
        pass,
    ))
}

fn sweep_csv_bytes(spec: &SweepSpec) -> Result<Vec<Vec<u8>>> {
    run_regime_sweep(spec)?
        .iter()
        .map(|entry| {
            let mut bytes = Vec::new();
            write_timeseries(&entry.trajectory, &mut bytes)?;
            Ok(bytes)
        })
        .collect()
}

pub fn determinism_and_io() -> Result<CriterionOutcome> {
    let pending = Pending::new(11, "determinism and I/O", None);
    let spec = SweepSpec {
        alphas: vec![0.4, 0.6, 0.8],
        data: InitialDataSpec::gaussian(1.0),
        grid: GridSpec {
            kind: DomainKind::WholeSpaceTruncated { radius: 8.0 },
            n: 257,
        },
        solver: SolverConfig {
            t_end: 0.25,
            ..SolverConfig::default()
        },
        gamma: 0.05,
    };
    let identical = sweep_csv_bytes(&spec)? == sweep_csv_bytes(&spec)?;

    let mut config = RunConfig::new(0.4, InitialDataSpec::gaussian(1.0));
    config.grid.n = 257;
    config.solver.t_end = 0.5;
    let grid = config.grid.build()?;
    let u0 = make_initial(&config.data, &grid, config.solver.delta)?.field;
    let whole = run(&u0, &config.solver)?;
    let partial = run_with(
        &u0,
        &config.solver,
        RunOptions {
            stop_after: Some(whole.reports.len() / 2),
            ..RunOptions::default()
        },
    )?;
    let hash = config.hash();
    let state = partial
        .final_state
        .expect("interrupted run keeps its state");
    let restored = load_snapshot(&emit_snapshot(&state, &hash)?, &hash)?;
    let bit_identical = restored.u == state.u && restored.t.to_bits() == state.t.to_bits();
    let resumed = run_with(
        &u0,
        &config.solver,
        RunOptions {
            resume: Some(restored),
            ..RunOptions::default()
        },
    )?;
    let l2 = |t: &Trajectory| t.reports.last().map_or(f64::NAN, |r| r.stats.l2);
    let rel = (l2(&resumed) - l2(&whole)).abs() / l2(&whole);
    let pass = identical && bit_identical && rel <= 1e-12;
    Ok(pending.finish(
        format!(
            "sweep CSVs identical {identical}, snapshot exact {bit_identical}, resume L^2 diff {rel:.1e}"
        ),
        "identical, exact, ≤ 1e-12".into(),
        pass,
    ))
}

/// Runs all eleven checks in order.
pub fn run_all() -> Result<Vec<CriterionOutcome>> {
    let mut out = vec![operator_exactness()?, roundtrip()?, ball_green_function()?];
    let started = Instant::now();
    let reference = reference_run(1e-3)?;
    let shared = started.elapsed();
    let mut mass = mass_identity(&reference)?;
    // the shared run counts against this check's budget too
    mass.elapsed += shared;
    mass.pass &= mass.elapsed < Duration::from_secs(30);
    out.push(mass);
    out.push(decay_regime(&reference)?);
    out.push(potential_bounds(&reference)?);
    out.push(ball_blowup()?);
    out.push(picard_contraction(&reference)?);
    out.push(m_matrix_positivity()?);
    out.push(bounded_regime()?);
    out.push(determinism_and_io()?);
    Ok(out)
}
