//! Monitors computed from fields and trajectories: the mass-balance identity
//! `∫u(t) + (1−α)∫₀ᵗ∫u² = ∫u₀`, norm ladders, two-sided potential bounds,
//! the pointwise bound for monotone fields and decay trends.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::grid::{lq_norm, weighted_sum, DomainKind, RadialField};
use crate::operators::{inverse_laplacian, laplacian_radial};
use crate::stepper::{RunState, RunStatus, SolverConfig, StepReport};
use crate::sum::compensated;
use crate::{Error, Result};

/// Thresholds used by the per-step checks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Allowed rise `u[i+1] − u[i]` relative to `max u`.
    pub monotone: f64,
    /// Tail guard: outer values relative to `max u`.
    pub tail: f64,
    /// Undershoot clamped to zero by the positivity floor, relative to `max u`.
    pub floor: f64,
    /// Per-step relative growth allowed in a decaying norm series.
    pub decay: f64,
    /// Slack for the pointwise bound `u(r₀) ≤ 3D₃/r₀³`, relative to `max u`.
    pub pointwise: f64,
    /// Fraction of steps skipped before decay monotonicity is judged.
    pub burn_in_fraction: f64,
    /// Fraction of outermost nodes inspected by the tail guard.
    pub tail_fraction: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            monotone: 1e-8,
            tail: 1e-10,
            floor: 1e-13,
            decay: 1e-8,
            pointwise: 1e-10,
            burn_in_fraction: 0.01,
            tail_fraction: 0.02,
        }
    }
}

/// Norms of a single field.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FieldStats {
    pub mass: f64,
    pub l1: f64,
    pub l2: f64,
    pub l2pd: f64,
    pub linf: f64,
    pub weighted_h2: f64,
    /// `‖u‖_{L^q}` for each exponent of the configured ladder.
    pub ladder: Vec<f64>,
}

impl FieldStats {
    pub fn of(u: &RadialField, delta: f64, ladder: &[f64]) -> Result<Self> {
        let grid = u.grid();
        Ok(Self {
            mass: weighted_sum(grid, u.values()),
            l1: lq_norm(u, 1.0)?,
            l2: lq_norm(u, 2.0)?,
            l2pd: lq_norm(u, 2.0 + delta)?,
            linf: u.values().iter().fold(0.0, |m, v| f64::max(m, v.abs())),
            weighted_h2: weighted_h2(u),
            ladder: ladder
                .iter()
                .map(|&q| lq_norm(u, q))
                .collect::<Result<_>>()?,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    pub t: f64,
    pub field: RadialField,
}

/// Time-ordered record of a run.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub config: SolverConfig,
    pub domain: DomainKind,
    pub u0_stats: FieldStats,
    pub reports: Vec<StepReport>,
    pub snapshots: Vec<Snapshot>,
    pub status: RunStatus,
    pub reason: String,
    pub warnings: Vec<String>,
    /// `(t, Q, ∫u²)` at the first recorded step's left endpoint; `(0, 0, ‖u₀‖²)`
    /// unless the run was resumed from a checkpoint.
    pub start: (f64, f64, f64),
    pub final_state: Option<RunState>,
}

impl Trajectory {
    pub fn final_time(&self) -> f64 {
        self.reports.last().map_or(self.start.0, |r| r.t)
    }

    pub fn is_diverged(&self) -> bool {
        self.status == RunStatus::Diverged
    }

    /// Time of the last accepted step, which for a diverged run is the
    /// detection time.
    pub fn divergence_time(&self) -> Option<f64> {
        self.is_diverged().then(|| self.final_time())
    }

    /// `(t, ‖u(t)‖_{L^q})` starting from the initial data. `q` must be 1, 2,
    /// `2 + δ` or one of the ladder exponents.
    pub fn norm_series(&self, q: f64) -> Result<Vec<(f64, f64)>> {
        let pick: Box<dyn Fn(&FieldStats) -> f64> = if q == 1.0 {
            Box::new(|s| s.l1)
        } else if q == 2.0 {
            Box::new(|s| s.l2)
        } else if (q - (2.0 + self.config.delta)).abs() < 1e-12 {
            Box::new(|s| s.l2pd)
        } else if let Some(k) = self
            .config
            .ladder
            .iter()
            .position(|&p| (p - q).abs() < 1e-12)
        {
            Box::new(move |s| s.ladder[k])
        } else {
            return Err(Error::invalid(
                "q",
                format!("exponent {q} is not tracked by this run"),
            ));
        };
        let mut out = Vec::with_capacity(self.reports.len() + 1);
        out.push((0.0, pick(&self.u0_stats)));
        out.extend(self.reports.iter().map(|r| (r.t, pick(&r.stats))));
        Ok(out)
    }

    pub fn mass_series(&self) -> Vec<(f64, f64)> {
        std::iter::once((0.0, self.u0_stats.mass))
            .chain(self.reports.iter().map(|r| (r.t, r.stats.mass)))
            .collect()
    }
}

/// `|∫u(t) + (1−α)Q(t) − ∫u₀| / ∫u₀` at the last report with `t ≤ upto`,
/// where `Q` is the trapezoid-in-time integral of `∫u²`.
pub fn mass_balance_residual(traj: &Trajectory, upto: f64) -> Result<f64> {
    if traj.reports.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    let m0 = traj.u0_stats.mass;
    if m0 == 0.0 {
        return Ok(0.0);
    }
    let alpha = traj.config.alpha;
    let (mut t_prev, mut q, mut sq_prev) = traj.start;
    let mut mass = None;
    let eps = 1e-12 * upto.abs().max(1.0);
    for r in &traj.reports {
        if r.t > upto + eps {
            break;
        }
        let sq = r.stats.l2 * r.stats.l2;
        q += 0.5 * (r.t - t_prev) * (sq_prev + sq);
        t_prev = r.t;
        sq_prev = sq;
        mass = Some(r.stats.mass);
    }
    let Some(mass) = mass else {
        return Ok(0.0);
    };
    Ok((mass + (1.0 - alpha) * q - m0).abs() / m0)
}

/// `4π ∫_{r₀}^{1/r₀} u ρ² dρ`: the mass in the shell `r₀ < |x| < 1/r₀`.
pub fn shell_mass(u: &RadialField, r0: f64) -> f64 {
    4.0 * PI * u.grid().segment_integral(u.values(), r0, 1.0 / r0, 2)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PotentialBounds {
    /// `max φ`.
    pub d1_est: f64,
    /// `min φ(r) ⟨r⟩`.
    pub d2_est: f64,
    pub ok: bool,
}

#[inline]
pub fn japanese_bracket(r: f64) -> f64 {
    (1.0 + r * r).sqrt()
}

/// Upper and lower constants for `D₂/⟨x⟩ ≤ (−Δ)⁻¹u ≤ D₁`, with `ok` when the
/// lower constant dominates the minorant `A₀ r₀ / (8π)`.
pub fn potential_bounds_check(u: &RadialField, r0: f64, a0: f64) -> Result<PotentialBounds> {
    if !(r0 > 0.0 && r0 < 1.0) {
        return Err(Error::invalid("r0", "must lie in (0, 1)"));
    }
    if !(a0 > 0.0) {
        return Err(Error::NonPositiveShellMass(a0));
    }
    let p = inverse_laplacian(u);
    let d1_est = p.max();
    let d2_est = p
        .phi
        .iter()
        .zip(u.grid().nodes())
        .map(|(&phi, &r)| phi * japanese_bracket(r))
        .fold(f64::INFINITY, f64::min);
    Ok(PotentialBounds {
        d1_est,
        d2_est,
        ok: d2_est >= a0 * r0 / (8.0 * PI),
    })
}

/// `u(r₀) − 3D₃/r₀³` with `D₃ = ∫₀^{r₀} u ρ² dρ`; non-positive for every
/// non-negative non-increasing field.
pub fn pointwise_monotone_bound(u: &RadialField, r0: f64) -> Result<f64> {
    let grid = u.grid();
    if !(r0 > 0.0 && r0 <= grid.radius()) {
        return Err(Error::invalid("r0", "must lie in (0, R]"));
    }
    let scale = u.values().iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    if let Some(index) = u.first_rise(1e-14 * scale) {
        return Err(Error::NonMonotone { index });
    }
    let d3 = grid.segment_integral(u.values(), 0.0, r0, 2);
    Ok(grid.interpolate(u.values(), r0) - 3.0 * d3 / r0.powi(3))
}

/// `‖⟨r⟩^{1/2} Δ_h u‖_{L²}`.
pub fn weighted_h2(u: &RadialField) -> f64 {
    let lap = laplacian_radial(u);
    let grid = u.grid();
    compensated(
        grid.weights()
            .iter()
            .zip(grid.nodes())
            .zip(lap.values())
            .map(|((w, &r), d)| w * japanese_bracket(r) * d * d),
    )
    .sqrt()
}

/// True iff the outermost `tail_fraction` of nodes is below `tol · max u`.
/// Always true on the ball, where `u` vanishes at the boundary by construction.
pub fn tail_guard_with(u: &RadialField, tol: f64, tail_fraction: f64) -> bool {
    if u.grid().kind().is_ball() {
        return true;
    }
    let n = u.len();
    let count = ((tail_fraction * n as f64).ceil() as usize).clamp(1, n);
    let peak = u.max().max(0.0);
    u.values()[n - count..].iter().all(|&v| v <= tol * peak)
}

pub fn tail_guard(u: &RadialField) -> bool {
    let tol = Tolerances::default();
    tail_guard_with(u, tol.tail, tol.tail_fraction)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayTrend {
    pub monotone_after_burnin: bool,
    /// `‖u(t_end)‖_q / ‖u₀‖_q`, with 0/0 taken as 0.
    pub terminal_ratio: f64,
    /// Whether `q` lies in the range covered by the known decay results for the
    /// run's α: `(1, 2]` for α < 1/2 and `(1, 3/2]` for α ∈ [1/2, 2/3).
    pub in_regime: bool,
}

pub fn decay_regime_contains(alpha: f64, q: f64) -> bool {
    if alpha < 0.5 {
        q > 1.0 && q <= 2.0
    } else if alpha < 2.0 / 3.0 {
        q > 1.0 && q <= 1.5
    } else {
        false
    }
}

pub fn decay_tracker(traj: &Trajectory, q: f64) -> Result<DecayTrend> {
    let series = traj.norm_series(q)?;
    let tol = traj.config.tolerances.decay;
    let burn =
        (traj.config.tolerances.burn_in_fraction * traj.reports.len() as f64).ceil() as usize;
    let monotone_after_burnin = series
        .windows(2)
        .skip(burn)
        .all(|pair| pair[1].1 - pair[0].1 <= tol * pair[0].1);
    let first = series[0].1;
    let last = series[series.len() - 1].1;
    let terminal_ratio = if first == 0.0 { 0.0 } else { last / first };
    Ok(DecayTrend {
        monotone_after_burnin,
        terminal_ratio,
        in_regime: decay_regime_contains(traj.config.alpha, q),
    })
}

/// `max_t ‖u(t)‖_q / ‖u₀‖_q` (0 for zero data).
pub fn max_growth(traj: &Trajectory, q: f64) -> Result<f64> {
    let series = traj.norm_series(q)?;
    let first = series[0].1;
    if first == 0.0 {
        return Ok(0.0);
    }
    Ok(series.iter().map(|&(_, v)| v / first).fold(0.0, f64::max))
}

/// Smallest slack of the blow-up minorant `M' ≥ (α − 1) M² / |B₁|` over the
/// recorded steps, with `M = ∫u` differenced between consecutive reports and
/// the allowance `slack_rel · M₀²` added. Non-negative when the minorant holds.
///
/// The bound follows from `∫u² ≥ M²/|B₁|` and applies to ball runs with α > 1.
pub fn ball_minorant_margin(traj: &Trajectory, slack_rel: f64) -> Result<f64> {
    if !traj.domain.is_ball() {
        return Err(Error::WrongDomain { expected: "ball" });
    }
    if traj.reports.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    let alpha = traj.config.alpha;
    let volume = 4.0 * PI / 3.0;
    let m0 = traj.u0_stats.mass;
    let series = traj.mass_series();
    Ok(series
        .windows(2)
        .map(|pair| {
            let ((t0, m_prev), (t1, m_next)) = (pair[0], pair[1]);
            let slope = (m_next - m_prev) / (t1 - t0);
            slope - (alpha - 1.0) * m_prev * m_prev / volume + slack_rel * m0 * m0
        })
        .fold(f64::INFINITY, f64::min))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use approx::assert_abs_diff_eq;
    use std::sync::Arc;

    fn free(n: usize, radius: f64) -> Arc<crate::RadialGrid> {
        make_grid(DomainKind::WholeSpaceTruncated { radius }, n).unwrap()
    }

    #[test]
    fn indicator_potential_bounds() {
        let g = free(1025, 8.0);
        let u = RadialField::indicator(g.clone(), 1.0);
        let a0 = shell_mass(&u, 0.5);
        assert_abs_diff_eq!(a0, 7.0 / 8.0 * 4.0 * PI / 3.0, epsilon = 1e-3);
        let b = potential_bounds_check(&u, 0.5, a0).unwrap();
        assert!(b.ok);
        assert!(b.d2_est >= 1.0 / 6.0);
        assert_abs_diff_eq!(b.d1_est, 0.5, epsilon = 1e-4);

        let doubled = potential_bounds_check(&u.scaled(2.0), 0.5, a0).unwrap();
        assert_abs_diff_eq!(doubled.d1_est, 2.0 * b.d1_est, epsilon = 1e-15);
        assert_abs_diff_eq!(doubled.d2_est, 2.0 * b.d2_est, epsilon = 1e-15);
    }

    #[test]
    fn zero_shell_mass_is_an_error() {
        let u = RadialField::zeros(free(64, 4.0));
        let a0 = shell_mass(&u, 0.5);
        assert!(matches!(
            potential_bounds_check(&u, 0.5, a0),
            Err(Error::NonPositiveShellMass(_))
        ));
    }

    #[test]
    fn monotone_bound_examples() {
        let g = free(513, 4.0);
        let c = RadialField::constant(g.clone(), 3.0);
        let v = pointwise_monotone_bound(&c, 1.0).unwrap();
        assert!(v.abs() < 1e-12, "{v}");

        let gauss = RadialField::from_fn(g.clone(), |r| (-r * r).exp());
        let v = pointwise_monotone_bound(&gauss, 1.0).unwrap();
        // 3 ∫₀¹ e^{−ρ²} ρ² dρ = 3 · 0.189472...
        assert_abs_diff_eq!(
            v,
            (-1.0f64).exp() - 3.0 * 0.189_472_345_820_492_6,
            epsilon = 1e-5
        );
        assert!(v < 0.0);

        assert_eq!(
            pointwise_monotone_bound(&RadialField::zeros(g.clone()), 1.0).unwrap(),
            0.0
        );

        let bumpy = RadialField::from_fn(g, |r| if (1.0..1.5).contains(&r) { 2.0 } else { 1.0 });
        assert!(matches!(
            pointwise_monotone_bound(&bumpy, 2.0),
            Err(Error::NonMonotone { .. })
        ));
    }

    #[test]
    fn weighted_h2_examples() {
        let g = make_grid(DomainKind::Ball, 1025).unwrap();
        assert_eq!(weighted_h2(&RadialField::zeros(g.clone())), 0.0);
        let u = RadialField::from_fn(g.clone(), |r| 1.0 - r * r / 6.0);
        let val = weighted_h2(&u);
        // Δu ≡ −1, so the value is (4π ∫₀¹ ⟨ρ⟩ ρ² dρ)^{1/2}; Simpson oracle
        let m = 20_000;
        let f = |x: f64| japanese_bracket(x) * x * x;
        let simpson: f64 = (0..m)
            .map(|k| {
                let (a, b) = (k as f64 / m as f64, (k + 1) as f64 / m as f64);
                (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b))
            })
            .sum();
        assert_abs_diff_eq!(simpson, 0.420_158_387_512_467_8, epsilon = 1e-12);
        assert_abs_diff_eq!(val, (4.0 * PI * simpson).sqrt(), epsilon = 1e-6);
        assert_abs_diff_eq!(weighted_h2(&u.scaled(2.0)), 2.0 * val, epsilon = 1e-12);
    }

    #[test]
    fn tail_guard_examples() {
        let g = free(513, 8.0);
        assert!(tail_guard(
            &RadialField::from_fn(g.clone(), |r| (-r * r).exp())
        ));
        assert!(!tail_guard(&RadialField::constant(g.clone(), 1.0)));
        assert!(!tail_guard(&RadialField::from_fn(g, |r| if r <= 8.0 {
            1.0
        } else {
            0.0
        })));
    }

    #[test]
    fn regime_ranges() {
        assert!(decay_regime_contains(0.4, 2.0));
        assert!(!decay_regime_contains(0.4, 1.0));
        assert!(decay_regime_contains(0.6, 1.5));
        assert!(!decay_regime_contains(0.6, 1.6));
        assert!(!decay_regime_contains(0.8, 1.2));
    }
}
