//! Initial data families, α-regime sweeps and refinement studies.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{
    decay_tracker, max_growth, tail_guard_with, weighted_h2, Tolerances, Trajectory,
};
use crate::grid::{lq_norm, make_grid, weighted_sum, DomainKind, RadialField, RadialGrid};
use crate::stepper::{run, RunStatus, SolverConfig};
use crate::{Error, Result};

/// Shape of the initial profile; every family is non-negative and
/// non-increasing in `r`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    /// `exp(−r²/a²)`.
    Gaussian { width: f64 },
    /// `height` on `[0, plateau]`, a C² quintic descent to zero on
    /// `[plateau, cutoff]`, zero beyond.
    Bump {
        height: f64,
        plateau: f64,
        cutoff: f64,
    },
    /// `core_height · (1 + r²)^{−p/2}`; integrable only for `p > 3`.
    PowerTail { power: f64, core_height: f64 },
    /// `max(1 − r², 0)`, the natural data for the unit ball.
    Parabola,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitialDataSpec {
    #[serde(flatten)]
    pub family: Family,
    pub amplitude: f64,
}

impl InitialDataSpec {
    pub fn gaussian(width: f64) -> Self {
        Self {
            family: Family::Gaussian { width },
            amplitude: 1.0,
        }
    }

    pub fn parabola() -> Self {
        Self {
            family: Family::Parabola,
            amplitude: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude.is_finite() && self.amplitude > 0.0) {
            return Err(Error::invalid("amplitude", "must be positive"));
        }
        match self.family {
            Family::Gaussian { width } if !(width.is_finite() && width > 0.0) => {
                Err(Error::invalid("width", "must be positive"))
            }
            Family::Bump {
                height,
                plateau,
                cutoff,
            } => {
                if !(height.is_finite() && height > 0.0) {
                    Err(Error::invalid("height", "must be positive"))
                } else if !(plateau >= 0.0 && cutoff > plateau) {
                    Err(Error::invalid("cutoff", "must exceed plateau >= 0"))
                } else {
                    Ok(())
                }
            }
            Family::PowerTail { power, core_height } => {
                if !(power > 3.0) {
                    Err(Error::invalid(
                        "power",
                        format!("must exceed 3 for an integrable tail, got {power}"),
                    ))
                } else if !(core_height.is_finite() && core_height > 0.0) {
                    Err(Error::invalid("core_height", "must be positive"))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    fn profile(&self, r: f64) -> f64 {
        let shape = match self.family {
            Family::Gaussian { width } => (-(r / width).powi(2)).exp(),
            Family::Bump {
                height,
                plateau,
                cutoff,
            } => {
                if r <= plateau {
                    height
                } else if r >= cutoff {
                    0.0
                } else {
                    let s = (r - plateau) / (cutoff - plateau);
                    height * (1.0 - s * s * s * (10.0 - 15.0 * s + 6.0 * s * s))
                }
            }
            Family::PowerTail { power, core_height } => {
                core_height * (1.0 + r * r).powf(-0.5 * power)
            }
            Family::Parabola => (1.0 - r * r).max(0.0),
        };
        self.amplitude * shape
    }
}

#[derive(Clone, Debug)]
pub struct InitialData {
    pub field: RadialField,
    pub mass: f64,
    pub l2pd: f64,
    pub weighted_h2: f64,
}

/// Samples `spec` on `grid`, checking it fits the domain.
pub fn make_initial(
    spec: &InitialDataSpec,
    grid: &Arc<RadialGrid>,
    delta: f64,
) -> Result<InitialData> {
    spec.validate()?;
    let radius = grid.radius();
    match spec.family {
        Family::Bump { cutoff, .. } if cutoff > radius => {
            return Err(Error::invalid(
                "cutoff",
                format!("bump cutoff {cutoff} lies beyond the truncation radius {radius}"),
            ));
        }
        Family::PowerTail { .. } if grid.kind().is_ball() => {
            return Err(Error::invalid(
                "family",
                "power_tail data is for the whole space",
            ));
        }
        _ => {}
    }

    let mut values: Vec<f64> = grid.nodes().iter().map(|&r| spec.profile(r)).collect();
    // exact monotonicity and positivity, independent of libm rounding
    for i in 1..values.len() {
        values[i] = values[i].max(0.0).min(values[i - 1]);
    }
    let field = RadialField::new(Arc::clone(grid), values)?;

    let tol = Tolerances::default();
    if grid.kind().is_ball() {
        let edge = *field.values().last().unwrap();
        if edge != 0.0 {
            return Err(Error::invalid(
                "family",
                format!("ball data must vanish at r = 1, got {edge:e}"),
            ));
        }
    } else if !tail_guard_with(&field, tol.tail, tol.tail_fraction) {
        let n = field.len();
        let count = ((tol.tail_fraction * n as f64).ceil() as usize).max(1);
        let value = field.values()[n - count..]
            .iter()
            .copied()
            .fold(0.0, f64::max);
        return Err(Error::TailBreach {
            value,
            limit: tol.tail * field.max(),
        });
    }

    Ok(InitialData {
        mass: weighted_sum(grid, field.values()),
        l2pd: lq_norm(&field, 2.0 + delta)?,
        weighted_h2: weighted_h2(&field),
        field,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    #[serde(flatten)]
    pub kind: DomainKind,
    pub n: usize,
}

impl GridSpec {
    pub fn build(&self) -> Result<Arc<RadialGrid>> {
        make_grid(self.kind, self.n)
    }
}

#[derive(Clone, Debug)]
pub struct SweepSpec {
    pub alphas: Vec<f64>,
    pub data: InitialDataSpec,
    pub grid: GridSpec,
    /// Template; `alpha` is overwritten per entry.
    pub solver: SolverConfig,
    /// Offset γ of the `L^{3/2+γ}` boundedness check.
    pub gamma: f64,
}

/// Regime-matched classification of one sweep entry.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Verdict {
    /// α < 1/2 on the whole space: the `L²` series must decay monotonically.
    Decay12 { pass: bool },
    /// α ∈ [1/2, 2/3) on the whole space: `L^{3/2+γ}` stays below twice its initial value.
    Decay23 { pass: bool },
    /// No decay or blow-up statement applies; data only.
    OpenRegime,
    /// α > 1 on the unit ball: divergence before the comparison-ODE time `t_star`.
    BallBlowup {
        pass: bool,
        t_div: Option<f64>,
        t_star: f64,
    },
}

impl Verdict {
    /// `None` for observational entries.
    pub fn passed(&self) -> Option<bool> {
        match *self {
            Verdict::Decay12 { pass } | Verdict::Decay23 { pass } => Some(pass),
            Verdict::BallBlowup { pass, .. } => Some(pass),
            Verdict::OpenRegime => None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Decay12 { .. } => "Decay12",
            Verdict::Decay23 { .. } => "Decay23",
            Verdict::OpenRegime => "OpenRegime",
            Verdict::BallBlowup { .. } => "BallBlowup",
        }
    }
}

#[derive(Clone, Debug)]
pub struct SweepEntry {
    pub alpha: f64,
    pub trajectory: Trajectory,
    pub verdict: Verdict,
}

/// `|B₁| / ((α − 1) M₀)`: blow-up time of `M' = (α − 1) M² / |B₁|`.
pub fn comparison_ode_time(alpha: f64, mass0: f64) -> f64 {
    (4.0 * PI / 3.0) / ((alpha - 1.0) * mass0)
}

pub fn classify(traj: &Trajectory, gamma: f64) -> Result<Verdict> {
    let alpha = traj.config.alpha;
    let ball = traj.domain.is_ball();
    let ok = traj.status == RunStatus::Ok;
    if ball && alpha > 1.0 {
        let t_star = comparison_ode_time(alpha, traj.u0_stats.mass);
        let t_div = traj.divergence_time();
        return Ok(Verdict::BallBlowup {
            pass: t_div.is_some_and(|t| t < t_star),
            t_div,
            t_star,
        });
    }
    if ball || alpha >= 2.0 / 3.0 {
        return Ok(Verdict::OpenRegime);
    }
    if alpha < 0.5 {
        let trend = decay_tracker(traj, 2.0)?;
        let decays = trend.terminal_ratio < 1.0 || traj.u0_stats.l2 == 0.0;
        Ok(Verdict::Decay12 {
            pass: ok && trend.monotone_after_burnin && decays,
        })
    } else {
        let growth = max_growth(traj, 1.5 + gamma)?;
        Ok(Verdict::Decay23 {
            pass: ok && growth <= 2.0,
        })
    }
}

/// Runs every α of the sweep (in parallel) and attaches its verdict.
/// Results are returned in the order of `spec.alphas`.
pub fn run_regime_sweep(spec: &SweepSpec) -> Result<Vec<SweepEntry>> {
    if spec.alphas.is_empty() {
        return Err(Error::invalid("alphas", "must not be empty"));
    }
    if let Some(a) = spec.alphas.iter().find(|a| !(a.is_finite() && **a >= 0.0)) {
        return Err(Error::invalid("alphas", format!("{a} is negative")));
    }
    let grid = spec.grid.build()?;
    let mut template = spec.solver.clone();
    let q_bounded = 1.5 + spec.gamma;
    if !template
        .ladder
        .iter()
        .any(|&q| (q - q_bounded).abs() < 1e-12)
    {
        template.ladder.push(q_bounded);
    }
    let u0 = make_initial(&spec.data, &grid, template.delta)?.field;

    spec.alphas
        .par_iter()
        .map(|&alpha| {
            let cfg = SolverConfig {
                alpha,
                ..template.clone()
            };
            let trajectory = run(&u0, &cfg)?;
            let verdict = classify(&trajectory, spec.gamma)?;
            Ok(SweepEntry {
                alpha,
                trajectory,
                verdict,
            })
        })
        .collect()
}

/// Which discretization parameter is refined between levels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefinementAxis {
    /// Halve `h` at fixed `dt`; level differences isolate the spatial error.
    Space,
    /// Halve `dt` on a fixed grid; level differences isolate the time error.
    Time,
    /// Halve both together.
    Joint,
}

#[derive(Clone, Debug)]
pub struct ConvergenceSetup {
    pub domain: DomainKind,
    /// Nodes on the coarsest level.
    pub n0: usize,
    /// Step on the coarsest level.
    pub dt0: f64,
    pub axis: RefinementAxis,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConvergenceRow {
    pub h: f64,
    pub dt: f64,
    /// `‖u_level − u_finest‖_{L²}` at `t_probe`, sampled on the level's nodes.
    pub error: f64,
}

#[derive(Clone, Debug)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    /// `log₂(d_k / d_{k+1})` for successive level differences `d_k = ‖u_k − u_{k+1}‖`.
    pub orders: Vec<f64>,
}

impl ConvergenceTable {
    /// Order from the two finest differences.
    pub fn observed_order(&self) -> f64 {
        self.orders.last().copied().unwrap_or(f64::NAN)
    }
}

fn coarse_l2_difference(coarse: &RadialField, fine: &RadialField) -> f64 {
    let stride = (fine.len() - 1) / (coarse.len() - 1);
    let grid = coarse.grid();
    let sum: f64 = grid
        .weights()
        .iter()
        .enumerate()
        .map(|(i, w)| {
            let d = coarse.values()[i] - fine.values()[i * stride];
            w * d * d
        })
        .sum();
    sum.sqrt()
}

/// Solves to `t_probe` on `levels` successively refined discretizations.
pub fn convergence_study(
    spec: &InitialDataSpec,
    alpha: f64,
    t_probe: f64,
    levels: usize,
    setup: &ConvergenceSetup,
) -> Result<ConvergenceTable> {
    spec.validate()?;
    convergence_study_from(
        |grid| Ok(make_initial(spec, grid, 0.1)?.field),
        alpha,
        t_probe,
        levels,
        setup,
    )
}

/// [`convergence_study`] for initial data produced by `init` on each level's grid.
pub fn convergence_study_from<F>(
    init: F,
    alpha: f64,
    t_probe: f64,
    levels: usize,
    setup: &ConvergenceSetup,
) -> Result<ConvergenceTable>
where
    F: Fn(&Arc<RadialGrid>) -> Result<RadialField> + Sync,
{
    if levels < 3 {
        return Err(Error::invalid(
            "levels",
            "need at least 3 refinement levels",
        ));
    }
    let fields = (0..levels)
        .into_par_iter()
        .map(|level| {
            let scale = 1usize << level;
            let (n, dt) = match setup.axis {
                RefinementAxis::Space => ((setup.n0 - 1) * scale + 1, setup.dt0),
                RefinementAxis::Time => (setup.n0, setup.dt0 / scale as f64),
                RefinementAxis::Joint => ((setup.n0 - 1) * scale + 1, setup.dt0 / scale as f64),
            };
            let grid = make_grid(setup.domain, n)?;
            let u0 = init(&grid)?;
            let cfg = SolverConfig {
                picard_max: 200,
                picard_tol: 1e-13,
                ..SolverConfig::fixed_step(alpha, dt, t_probe)
            };
            let traj = run(&u0, &cfg)?;
            if traj.status != RunStatus::Ok {
                return Err(Error::invalid(
                    "convergence",
                    format!(
                        "level {level} ended with {}: {}",
                        traj.status.as_str(),
                        traj.reason
                    ),
                ));
            }
            let field = traj.final_state.expect("finished run").u;
            Ok((grid.spacing(), dt, field))
        })
        .collect::<Result<Vec<_>>>()?;

    let finest = &fields[levels - 1].2;
    let rows = fields
        .iter()
        .map(|(h, dt, u)| ConvergenceRow {
            h: *h,
            dt: *dt,
            error: coarse_l2_difference(u, finest),
        })
        .collect();
    let diffs: Vec<f64> = fields
        .windows(2)
        .map(|pair| coarse_l2_difference(&pair[0].2, &pair[1].2))
        .collect();
    let orders = diffs
        .windows(2)
        .map(|d| {
            if d[1] > 0.0 {
                (d[0] / d[1]).log2()
            } else {
                f64::NAN
            }
        })
        .collect();
    Ok(ConvergenceTable { rows, orders })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn free(n: usize, radius: f64) -> Arc<RadialGrid> {
        make_grid(DomainKind::WholeSpaceTruncated { radius }, n).unwrap()
    }

    #[test]
    fn gaussian_initial_mass() {
        let data = make_initial(&InitialDataSpec::gaussian(1.0), &free(4097, 8.0), 0.1).unwrap();
        assert_relative_eq!(data.mass, PI.powf(1.5), max_relative = 1e-6);
        assert!(data.weighted_h2 > 0.0);
    }

    #[test]
    fn bump_beyond_radius_is_rejected() {
        let spec = InitialDataSpec {
            family: Family::Bump {
                height: 1.0,
                plateau: 1.0,
                cutoff: 5.0,
            },
            amplitude: 1.0,
        };
        assert!(make_initial(&spec, &free(65, 4.0), 0.1).is_err());
        assert!(make_initial(&spec, &free(129, 8.0), 0.1).is_ok());
    }

    #[test]
    fn power_tail_needs_integrable_decay() {
        let spec = InitialDataSpec {
            family: Family::PowerTail {
                power: 3.0,
                core_height: 1.0,
            },
            amplitude: 1.0,
        };
        match make_initial(&spec, &free(65, 8.0), 0.1) {
            Err(Error::InvalidParameter { key, .. }) => assert_eq!(key, "power"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn power_tail_on_short_domain_breaches_tail() {
        let spec = InitialDataSpec {
            family: Family::PowerTail {
                power: 4.0,
                core_height: 1.0,
            },
            amplitude: 1.0,
        };
        assert!(matches!(
            make_initial(&spec, &free(65, 8.0), 0.1),
            Err(Error::TailBreach { .. })
        ));
    }

    #[test]
    fn ball_requires_vanishing_boundary() {
        let g = make_grid(DomainKind::Ball, 65).unwrap();
        assert!(make_initial(&InitialDataSpec::parabola(), &g, 0.1).is_ok());
        assert!(make_initial(&InitialDataSpec::gaussian(1.0), &g, 0.1).is_err());
    }

    #[test]
    fn open_regime_has_no_verdict() {
        let spec = SweepSpec {
            alphas: vec![0.8],
            data: InitialDataSpec::gaussian(1.0),
            grid: GridSpec {
                kind: DomainKind::WholeSpaceTruncated { radius: 8.0 },
                n: 129,
            },
            solver: SolverConfig {
                t_end: 0.05,
                ..SolverConfig::default()
            },
            gamma: 0.05,
        };
        let out = run_regime_sweep(&spec).unwrap();
        assert_eq!(out[0].verdict, Verdict::OpenRegime);
        assert_eq!(out[0].verdict.passed(), None);
    }

    #[test]
    fn comparison_time_for_unit_parabola() {
        assert_relative_eq!(
            comparison_ode_time(1.5, 8.0 * PI / 15.0),
            5.0,
            max_relative = 1e-14
        );
    }

    #[test]
    fn zero_data_converges_trivially() {
        let setup = ConvergenceSetup {
            domain: DomainKind::WholeSpaceTruncated { radius: 8.0 },
            n0: 33,
            dt0: 0.05,
            axis: RefinementAxis::Joint,
        };
        let table =
            convergence_study_from(|g| Ok(RadialField::zeros(g.clone())), 0.4, 0.1, 3, &setup)
                .unwrap();
        assert!(table.rows.iter().all(|r| r.error == 0.0));
    }

    #[test]
    fn too_few_levels() {
        let setup = ConvergenceSetup {
            domain: DomainKind::WholeSpaceTruncated { radius: 8.0 },
            n0: 65,
            dt0: 0.01,
            axis: RefinementAxis::Space,
        };
        assert!(convergence_study(&InitialDataSpec::gaussian(1.0), 0.0, 0.1, 2, &setup).is_err());
    }
}
