//! Time integration by the frozen-coefficient implicit scheme.
//!
//! One linear step solves
//!
//! ```text
//! (I − dt · diag(φ) · Δ_h) w = u + dt · α · v²,    φ = (−Δ)⁻¹v
//! ```
//!
//! with the coefficient and source frozen at `v`. With `v = u` this is
//! [`step_frozen`]; [`step_picard`] re-freezes at the latest iterate until the
//! iterates contract. For `φ ≥ 0` the matrix is an M-matrix (non-positive
//! off-diagonals, unit row sums), so non-negative data stay non-negative.
//!
//! Boundary rows: the ball pins `w = 0` at `r = 1`; the truncated whole space
//! closes the last row with a zero-flux ghost node `w[n] = w[n−2]`, and relies
//! on the tail guard to keep `u` negligible there.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{
    potential_bounds_check, shell_mass, tail_guard_with, FieldStats, Snapshot, Tolerances,
    Trajectory,
};
use crate::grid::{RadialField, RadialGrid};
use crate::operators::{inverse_laplacian, laplacian_row, Potential};
use crate::sum::compensated;
use crate::tridiag::Tridiagonal;
use crate::{Error, Result};

/// Clean steps after which `dt` is doubled.
const GROWTH_AFTER: u32 = 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub alpha: f64,
    pub dt0: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub t_end: f64,
    pub picard_max: usize,
    pub picard_tol: f64,
    /// Divergence is declared once `‖u‖_∞ > blowup_threshold · ‖u₀‖_∞`.
    pub blowup_threshold: f64,
    pub snapshot_stride: usize,
    /// Exponent offset of the `L^{2+δ}` norm.
    pub delta: f64,
    /// Inner radius of the shell `r₀ < |x| < 1/r₀` used by the potential monitor.
    pub r0: f64,
    /// Extra `L^q` exponents recorded at every step.
    pub ladder: Vec<f64>,
    pub tolerances: Tolerances,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            alpha: 0.4,
            dt0: 1e-3,
            dt_min: 1e-12,
            dt_max: 1e-2,
            t_end: 1.0,
            picard_max: 50,
            picard_tol: 1e-10,
            blowup_threshold: 1e6,
            snapshot_stride: 100,
            delta: 0.1,
            r0: 0.5,
            ladder: vec![1.4, 1.55],
            tolerances: Tolerances::default(),
        }
    }
}

impl SolverConfig {
    /// A config that takes fixed steps of size `dt` up to `t_end`.
    pub fn fixed_step(alpha: f64, dt: f64, t_end: f64) -> Self {
        Self {
            alpha,
            dt0: dt,
            dt_min: dt,
            dt_max: dt,
            t_end,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |key: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(
                    key,
                    format!("must be positive and finite, got {v}"),
                ))
            }
        };
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(Error::invalid(
                "alpha",
                format!("must be non-negative, got {}", self.alpha),
            ));
        }
        positive("dt_min", self.dt_min)?;
        positive("dt0", self.dt0)?;
        positive("dt_max", self.dt_max)?;
        positive("t_end", self.t_end)?;
        positive("picard_tol", self.picard_tol)?;
        if self.dt_min > self.dt_max {
            return Err(Error::invalid("dt_min", "must not exceed dt_max"));
        }
        if self.dt0 < self.dt_min || self.dt0 > self.dt_max {
            return Err(Error::invalid("dt0", "must lie in [dt_min, dt_max]"));
        }
        if self.picard_max < 1 {
            return Err(Error::invalid("picard_max", "must be at least 1"));
        }
        if !(self.blowup_threshold.is_finite() && self.blowup_threshold > 1.0) {
            return Err(Error::invalid("blowup_threshold", "must exceed 1"));
        }
        if self.snapshot_stride < 1 {
            return Err(Error::invalid("snapshot_stride", "must be at least 1"));
        }
        if !(self.delta.is_finite() && self.delta > 0.0) {
            return Err(Error::invalid("delta", "must be positive"));
        }
        if !(self.r0 > 0.0 && self.r0 < 1.0) {
            return Err(Error::invalid("r0", "must lie in (0, 1)"));
        }
        if let Some(q) = self.ladder.iter().find(|q| !(q.is_finite() && **q >= 1.0)) {
            return Err(Error::invalid("ladder", format!("exponent {q} is below 1")));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RunStatus {
    Ok,
    Diverged,
    TailBreach,
}

impl RunStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            RunStatus::Ok => "Ok",
            RunStatus::Diverged => "Diverged",
            RunStatus::TailBreach => "TailBreach",
        }
    }
}

/// Everything recorded after an accepted step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepReport {
    pub t: f64,
    pub dt: f64,
    pub stats: FieldStats,
    pub mass_balance_residual: f64,
    pub picard_iters: usize,
    pub picard_ratio: f64,
    pub monotone_ok: bool,
    pub positive_ok: bool,
    pub potential_bounds_ok: bool,
    pub tail_ok: bool,
    pub d1_est: f64,
    pub d2_est: f64,
    pub status: RunStatus,
}

impl StepReport {
    pub fn l1(&self) -> f64 {
        self.stats.l1
    }
    pub fn l2(&self) -> f64 {
        self.stats.l2
    }
    pub fn l2pd(&self) -> f64 {
        self.stats.l2pd
    }
    pub fn linf(&self) -> f64 {
        self.stats.linf
    }
    pub fn weighted_h2(&self) -> f64 {
        self.stats.weighted_h2
    }
}

/// Resumable solver state at a step boundary.
#[derive(Clone, Debug, PartialEq)]
pub struct RunState {
    pub step: usize,
    pub t: f64,
    pub dt: f64,
    pub clean_steps: u32,
    /// Trapezoid-in-time `∫₀ᵗ ∫u² dx ds`.
    pub q_integral: f64,
    /// `∫u²` at `t`.
    pub last_sq: f64,
    pub u0_stats: FieldStats,
    pub u: RadialField,
    pub finished: bool,
}

fn l2_norm(grid: &RadialGrid, v: &[f64]) -> f64 {
    compensated(grid.weights().iter().zip(v).map(|(w, x)| w * x * x)).sqrt()
}

/// Assembles `I − dt · diag(φ) · Δ_h` with the domain's outer row.
fn assemble(grid: &RadialGrid, phi: &[f64], dt: f64) -> Tridiagonal {
    let n = grid.len();
    let mut m = Tridiagonal::zeros(n);
    for i in 0..n - 1 {
        let (lower, diag, upper) = laplacian_row(grid, i);
        let c = dt * phi[i];
        m.lower[i] = -c * lower;
        m.diag[i] = 1.0 - c * diag;
        m.upper[i] = -c * upper;
    }
    let k = n - 1;
    if grid.kind().is_ball() {
        m.diag[k] = 1.0;
    } else {
        let c = 2.0 * dt * phi[k] / grid.spacing().powi(2);
        m.lower[k] = -c;
        m.diag[k] = 1.0 + c;
    }
    m
}

/// Solves one frozen linear step with coefficient `φ` and source `α v²`.
fn frozen_solve(
    u: &RadialField,
    phi: &Potential,
    source_from: &RadialField,
    dt: f64,
    alpha: f64,
) -> Result<RadialField> {
    let grid = u.grid();
    let m = assemble(grid, &phi.phi, dt);
    let mut rhs: Vec<f64> = u
        .values()
        .iter()
        .zip(source_from.values())
        .map(|(&x, &v)| x + dt * alpha * v * v)
        .collect();
    if grid.kind().is_ball() {
        *rhs.last_mut().unwrap() = 0.0;
    }
    let w = m.solve(&rhs)?;
    RadialField::new(Arc::clone(grid), w)
}

/// Backward Euler step with the diffusion coefficient `φ` and the source
/// `α u²` both frozen at `u`.
pub fn step_frozen(u: &RadialField, phi: &Potential, dt: f64, alpha: f64) -> Result<RadialField> {
    u.check_grid(&phi.grid)?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid("dt", "must be positive"));
    }
    frozen_solve(u, phi, u, dt, alpha)
}

#[derive(Clone, Debug)]
pub struct PicardOutcome {
    pub field: RadialField,
    /// Number of linear solves performed.
    pub iterations: usize,
    /// Last contraction ratio `‖w⁽ʲ⁾ − w⁽ʲ⁻¹⁾‖ / ‖w⁽ʲ⁻¹⁾ − w⁽ʲ⁻²⁾‖`; 0 when fewer
    /// than two corrections were taken.
    pub ratio: f64,
    pub converged: bool,
}

/// Picard iteration of frozen steps within one time step.
///
/// With `picard_max = 1` this is exactly [`step_frozen`] and is reported as
/// converged.
pub fn step_picard(u: &RadialField, cfg: &SolverConfig, dt: f64) -> Result<PicardOutcome> {
    let grid = Arc::clone(u.grid());
    let phi = inverse_laplacian(u);
    let mut w = step_frozen(u, &phi, dt, cfg.alpha)?;
    if cfg.picard_max == 1 || w.is_zero() {
        return Ok(PicardOutcome {
            field: w,
            iterations: 1,
            ratio: 0.0,
            converged: true,
        });
    }

    let mut prev_diff: Option<f64> = None;
    let mut ratio = 0.0;
    let mut iterations = 1;
    while iterations < cfg.picard_max {
        let phi = inverse_laplacian(&w);
        let next = frozen_solve(u, &phi, &w, dt, cfg.alpha)?;
        iterations += 1;
        let diff: Vec<f64> = next
            .values()
            .iter()
            .zip(w.values())
            .map(|(a, b)| a - b)
            .collect();
        let diff = l2_norm(&grid, &diff);
        let size = l2_norm(&grid, next.values());
        if let Some(p) = prev_diff {
            ratio = if p > 0.0 { diff / p } else { 0.0 };
        }
        w = next;
        if !diff.is_finite() || !w.is_finite() {
            break;
        }
        if diff <= cfg.picard_tol * size {
            return Ok(PicardOutcome {
                field: w,
                iterations,
                ratio,
                converged: true,
            });
        }
        // expanding iterates will not come back
        if prev_diff.is_some() && ratio >= 1.0 && iterations >= 4 {
            break;
        }
        prev_diff = Some(diff);
    }
    Ok(PicardOutcome {
        field: w,
        iterations,
        ratio,
        converged: false,
    })
}

/// Clamps undershoot in `(−ε, 0)` to zero, `ε = floor_rel · max u`.
/// Values at or below `−ε` are left for the positivity check to catch.
pub fn positivity_floor_with(u: &RadialField, floor_rel: f64) -> RadialField {
    let eps = floor_rel * u.max().max(0.0);
    u.map(|v| if v < 0.0 && v > -eps { 0.0 } else { v })
}

pub fn positivity_floor(u: &RadialField) -> RadialField {
    positivity_floor_with(u, Tolerances::default().floor)
}

/// Callback receiving the solver state at checkpoints.
pub type CheckpointFn<'a> = &'a mut dyn FnMut(&RunState) -> Result<()>;

/// Options for [`run_with`].
#[derive(Default)]
pub struct RunOptions<'a> {
    /// Continue from a checkpoint instead of `u0`.
    pub resume: Option<RunState>,
    /// Stop (without finishing) after this many total steps.
    pub stop_after: Option<usize>,
    /// Called with the solver state every `snapshot_stride` steps and at the end.
    pub on_checkpoint: Option<CheckpointFn<'a>>,
}

/// Runs the adaptive time loop from `u0` to `cfg.t_end`.
pub fn run(u0: &RadialField, cfg: &SolverConfig) -> Result<Trajectory> {
    run_with(u0, cfg, RunOptions::default())
}

pub fn run_with(
    u0: &RadialField,
    cfg: &SolverConfig,
    mut opts: RunOptions<'_>,
) -> Result<Trajectory> {
    cfg.validate()?;
    let tol = &cfg.tolerances;
    let grid = Arc::clone(u0.grid());
    let domain = grid.kind();
    let mut warnings = Vec::new();

    let mut state = match opts.resume.take() {
        Some(state) => {
            state.u.check_grid(&grid)?;
            state
        }
        None => {
            if !u0.is_finite() {
                return Err(Error::invalid("u0", "contains non-finite values"));
            }
            if u0.min() < 0.0 {
                return Err(Error::invalid("u0", "must be non-negative"));
            }
            if let Some(i) = u0.first_rise(tol.monotone * u0.max()) {
                warnings.push(format!(
                    "u0 is not radially non-increasing (rise at node {i})"
                ));
            }
            let u0_stats = FieldStats::of(u0, cfg.delta, &cfg.ladder)?;
            RunState {
                step: 0,
                t: 0.0,
                dt: cfg.dt0,
                clean_steps: 0,
                q_integral: 0.0,
                last_sq: u0_stats.l2 * u0_stats.l2,
                u0_stats,
                u: u0.clone(),
                finished: false,
            }
        }
    };

    let mut traj = Trajectory {
        config: cfg.clone(),
        domain,
        u0_stats: state.u0_stats.clone(),
        reports: Vec::new(),
        snapshots: Vec::new(),
        status: RunStatus::Ok,
        reason: String::new(),
        warnings,
        start: (state.t, state.q_integral, state.last_sq),
        final_state: None,
    };
    if state.finished {
        traj.reason = "run already complete".into();
        traj.final_state = Some(state);
        return Ok(traj);
    }

    let m0 = state.u0_stats.mass;
    let linf0 = state.u0_stats.linf;

    while state.t < cfg.t_end {
        if opts.stop_after.is_some_and(|limit| state.step >= limit) {
            traj.reason = format!("stopped after {} steps", state.step);
            break;
        }
        let remaining = cfg.t_end - state.t;
        let reaches_end = state.dt >= remaining * (1.0 - 1e-9);
        let dt = if reaches_end { remaining } else { state.dt };

        let attempt = step_picard(&state.u, cfg, dt).map(|outcome| {
            let field = positivity_floor_with(&outcome.field, tol.floor);
            (outcome, field)
        });
        let accepted = match attempt {
            Ok((outcome, field)) => {
                let positive = field.min() >= 0.0;
                (outcome.converged && positive && field.is_finite()).then_some((outcome, field))
            }
            Err(_) => None,
        };
        let Some((outcome, w)) = accepted else {
            let halved = 0.5 * dt;
            if halved < cfg.dt_min {
                traj.status = RunStatus::Diverged;
                traj.reason = format!(
                    "step rejected at t = {} with dt = {dt:e}; dt_min = {:e} reached",
                    state.t, cfg.dt_min
                );
                break;
            }
            state.dt = halved;
            state.clean_steps = 0;
            continue;
        };

        let t_new = if reaches_end { cfg.t_end } else { state.t + dt };
        let stats = FieldStats::of(&w, cfg.delta, &cfg.ladder)?;
        let sq = stats.l2 * stats.l2;
        state.q_integral += 0.5 * dt * (state.last_sq + sq);
        state.last_sq = sq;
        let residual = if m0 == 0.0 {
            0.0
        } else {
            (stats.mass + (1.0 - cfg.alpha) * state.q_integral - m0).abs() / m0
        };

        let peak = w.max().max(0.0);
        let monotone_ok = w.max_rise() <= tol.monotone * peak;
        let positive_ok = w.min() >= 0.0;
        let tail_ok = tail_guard_with(&w, tol.tail, tol.tail_fraction);
        let (potential_bounds_ok, d1_est, d2_est) = if domain.is_ball() {
            let p = inverse_laplacian(&w);
            let ok = p.phi.iter().all(|&x| x >= 0.0 && x.is_finite());
            (ok, p.max(), f64::NAN)
        } else {
            let a0 = shell_mass(&w, cfg.r0);
            match potential_bounds_check(&w, cfg.r0, a0) {
                Ok(b) => (b.ok, b.d1_est, b.d2_est),
                Err(_) => (false, 0.0, 0.0),
            }
        };

        let mut status = RunStatus::Ok;
        if linf0 > 0.0 && stats.linf > cfg.blowup_threshold * linf0 {
            status = RunStatus::Diverged;
            traj.reason = format!(
                "sup norm {:e} exceeded {} x initial at t = {t_new}",
                stats.linf, cfg.blowup_threshold
            );
        } else if !tail_ok {
            status = RunStatus::TailBreach;
            traj.reason = format!("tail guard tripped at t = {t_new}");
        }

        state.step += 1;
        state.t = t_new;
        state.u = w;
        traj.reports.push(StepReport {
            t: t_new,
            dt,
            stats,
            mass_balance_residual: residual,
            picard_iters: outcome.iterations,
            picard_ratio: outcome.ratio,
            monotone_ok,
            positive_ok,
            potential_bounds_ok,
            tail_ok,
            d1_est,
            d2_est,
            status,
        });

        if !reaches_end {
            state.clean_steps += 1;
            if state.clean_steps >= GROWTH_AFTER {
                state.dt = (2.0 * state.dt).min(cfg.dt_max);
                state.clean_steps = 0;
            }
        }

        if status != RunStatus::Ok {
            traj.status = status;
            break;
        }
        if state.step % cfg.snapshot_stride == 0 {
            traj.snapshots.push(Snapshot {
                step: state.step,
                t: state.t,
                field: state.u.clone(),
            });
            if let Some(cb) = opts.on_checkpoint.as_mut() {
                cb(&state)?;
            }
        }
    }

    if traj.status == RunStatus::Ok && state.t >= cfg.t_end {
        state.finished = true;
    }
    if traj.status != RunStatus::Ok {
        state.finished = true;
    }
    if traj.snapshots.last().map(|s| s.step) != Some(state.step) {
        traj.snapshots.push(Snapshot {
            step: state.step,
            t: state.t,
            field: state.u.clone(),
        });
    }
    if let Some(cb) = opts.on_checkpoint.as_mut() {
        cb(&state)?;
    }
    traj.final_state = Some(state);
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{integrate, make_grid, DomainKind};

    fn free(n: usize, radius: f64) -> Arc<RadialGrid> {
        make_grid(DomainKind::WholeSpaceTruncated { radius }, n).unwrap()
    }

    fn gaussian(grid: Arc<RadialGrid>) -> RadialField {
        RadialField::from_fn(grid, |r| (-r * r).exp())
    }

    #[test]
    fn zero_is_a_fixed_point() {
        let u = RadialField::zeros(free(65, 4.0));
        let phi = inverse_laplacian(&u);
        let w = step_frozen(&u, &phi, 0.1, 2.0).unwrap();
        assert!(w.is_zero());
        let cfg = SolverConfig::default();
        let out = step_picard(&u, &cfg, 0.1).unwrap();
        assert!(out.field.is_zero());
        assert_eq!(out.iterations, 1);
        assert!(out.converged);
    }

    #[test]
    fn mass_decreases_without_reaction() {
        let g = free(257, 8.0);
        let u = gaussian(g.clone());
        let phi = inverse_laplacian(&u);
        let w = step_frozen(&u, &phi, 1e-2, 0.0).unwrap();
        assert!(integrate(&g, &w).unwrap() < integrate(&g, &u).unwrap());
    }

    #[test]
    fn single_picard_iteration_is_the_frozen_step() {
        let g = free(129, 6.0);
        let u = gaussian(g);
        let cfg = SolverConfig {
            picard_max: 1,
            ..SolverConfig::default()
        };
        let out = step_picard(&u, &cfg, 0.01).unwrap();
        let frozen = step_frozen(&u, &inverse_laplacian(&u), 0.01, cfg.alpha).unwrap();
        assert_eq!(out.field, frozen);
        assert_eq!(out.iterations, 1);
    }

    #[test]
    fn picard_contracts_for_small_dt() {
        let u = gaussian(free(257, 8.0));
        let out = step_picard(&u, &SolverConfig::default(), 1e-3).unwrap();
        assert!(out.converged);
        assert!(out.ratio < 0.5, "ratio {}", out.ratio);
        assert!(out.iterations <= SolverConfig::default().picard_max);
    }

    #[test]
    fn ball_step_pins_boundary() {
        let g = make_grid(DomainKind::Ball, 65).unwrap();
        let u = RadialField::from_fn(g, |r| 1.0 - r * r);
        let w = step_frozen(&u, &inverse_laplacian(&u), 0.01, 1.5).unwrap();
        assert_eq!(*w.values().last().unwrap(), 0.0);
    }

    #[test]
    fn floor_examples() {
        let g = free(16, 1.0);
        let mut v = vec![1.0; 16];
        v[5] = -1e-15;
        let u = RadialField::new(g.clone(), v.clone()).unwrap();
        assert_eq!(positivity_floor(&u).values()[5], 0.0);
        v[5] = -1e-6;
        let u = RadialField::new(g.clone(), v).unwrap();
        assert_eq!(positivity_floor(&u).values()[5], -1e-6);
        let pos = RadialField::constant(g, 0.3);
        assert_eq!(positivity_floor(&pos), pos);
    }

    #[test]
    fn config_validation_names_key() {
        let cfg = SolverConfig {
            alpha: -1.0,
            ..SolverConfig::default()
        };
        match cfg.validate() {
            Err(Error::InvalidParameter { key, .. }) => assert_eq!(key, "alpha"),
            other => panic!("unexpected {other:?}"),
        }
        let cfg = SolverConfig {
            dt_min: 1.0,
            dt_max: 0.1,
            ..SolverConfig::default()
        };
        match cfg.validate() {
            Err(Error::InvalidParameter { key, .. }) => assert_eq!(key, "dt_min"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn zero_run_stays_zero() {
        let u0 = RadialField::zeros(free(65, 4.0));
        let cfg = SolverConfig::fixed_step(0.4, 0.1, 0.3);
        let traj = run(&u0, &cfg).unwrap();
        assert_eq!(traj.status, RunStatus::Ok);
        assert_eq!(traj.reports.len(), 3);
        assert!(traj
            .reports
            .iter()
            .all(|r| r.stats.l1 == 0.0 && r.stats.linf == 0.0));
    }

    #[test]
    fn adaptive_dt_grows_to_cap() {
        let u0 = gaussian(free(129, 8.0));
        let cfg = SolverConfig {
            dt0: 1e-3,
            dt_max: 4e-3,
            t_end: 0.2,
            ..SolverConfig::default()
        };
        let traj = run(&u0, &cfg).unwrap();
        assert_eq!(traj.status, RunStatus::Ok);
        let max_dt = traj.reports.iter().map(|r| r.dt).fold(0.0, f64::max);
        assert_eq!(max_dt, 4e-3);
        assert_eq!(traj.final_time(), 0.2);
    }
}
