//! Uniform radial mesh on `[0, R]` with quadrature for integrals over ℝ³.
//!
//! Weights are `4πρ²` times endpoint-corrected trapezoid weights in `ρ`
//! (`h · [3/8, 7/6, 23/24, 1, …, 1, 23/24, 7/6, 3/8]`). The corrected rule is
//! exact for cubics, so `Σ w = 4πR³/3` and `∫ r dx` hold to rounding and
//! smooth integrands converge at fourth order.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::sum::{compensated, CompensatedSum};
use crate::{Error, Result};

pub const MIN_NODES: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum DomainKind {
    /// ℝ³ truncated at a user-set radius; the solver keeps `u` numerically
    /// supported inside it.
    WholeSpaceTruncated { radius: f64 },
    /// The closed unit ball with homogeneous Dirichlet data for `u` and `φ`.
    Ball,
}

impl DomainKind {
    pub fn radius(&self) -> f64 {
        match *self {
            DomainKind::WholeSpaceTruncated { radius } => radius,
            DomainKind::Ball => 1.0,
        }
    }

    pub fn is_ball(&self) -> bool {
        matches!(self, DomainKind::Ball)
    }

    pub fn name(&self) -> &'static str {
        match self {
            DomainKind::WholeSpaceTruncated { .. } => "free",
            DomainKind::Ball => "ball",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RadialGrid {
    kind: DomainKind,
    h: f64,
    r: Vec<f64>,
    w: Vec<f64>,
}

const ENDPOINT_CORRECTION: [f64; 3] = [3.0 / 8.0, 7.0 / 6.0, 23.0 / 24.0];

impl RadialGrid {
    /// Builds a uniform grid with `n` nodes. `radius` is ignored for the ball
    /// (where it must be 1 if given through [`make_grid`]).
    pub fn new(kind: DomainKind, n: usize) -> Result<Self> {
        if n < MIN_NODES {
            return Err(Error::TooFewNodes {
                min: MIN_NODES,
                got: n,
            });
        }
        let radius = kind.radius();
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::BadRadius(radius));
        }
        let h = radius / (n - 1) as f64;
        let mut r: Vec<f64> = (0..n).map(|i| i as f64 * h).collect();
        r[n - 1] = radius;

        let mut w: Vec<f64> = r.iter().map(|&x| 4.0 * PI * x * x * h).collect();
        for (k, c) in ENDPOINT_CORRECTION.iter().enumerate() {
            w[k] *= c;
            w[n - 1 - k] *= c;
        }
        Ok(Self { kind, h, r, w })
    }

    pub fn kind(&self) -> DomainKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn radius(&self) -> f64 {
        self.kind.radius()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.r
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn volume(&self) -> f64 {
        compensated(self.w.iter().copied())
    }

    /// Radial integral `∫_a^b g(ρ) ρ^power dρ` of the piecewise-linear
    /// interpolant of nodal values `g`, for `0 ≤ a ≤ b ≤ R`.
    pub fn segment_integral(&self, g: &[f64], a: f64, b: f64, power: u32) -> f64 {
        debug_assert_eq!(g.len(), self.len());
        let a = a.clamp(0.0, self.radius());
        let b = b.clamp(0.0, self.radius());
        if b <= a {
            return 0.0;
        }
        // two-point Gauss-Legendre is exact for linear × ρ^{≤2}
        let gauss = 0.5 / 3f64.sqrt();
        let first = ((a / self.h).floor() as usize).min(self.len() - 2);
        let mut acc = CompensatedSum::default();
        for i in first..self.len() - 1 {
            let (lo, hi) = (self.r[i], self.r[i + 1]);
            if lo >= b {
                break;
            }
            let x0 = lo.max(a);
            let x1 = hi.min(b);
            if x1 <= x0 {
                continue;
            }
            let mid = 0.5 * (x0 + x1);
            let half = x1 - x0;
            for x in [mid - gauss * half, mid + gauss * half] {
                let s = (x - lo) / (hi - lo);
                let val = g[i] * (1.0 - s) + g[i + 1] * s;
                acc.add(0.5 * half * val * x.powi(power as i32));
            }
        }
        acc.value()
    }

    /// Linear interpolation of nodal values at radius `x`.
    pub fn interpolate(&self, g: &[f64], x: f64) -> f64 {
        let x = x.clamp(0.0, self.radius());
        let i = ((x / self.h).floor() as usize).min(self.len() - 2);
        let s = (x - self.r[i]) / (self.r[i + 1] - self.r[i]);
        g[i] * (1.0 - s) + g[i + 1] * s
    }
}

/// Builds a grid for `kind` with `n` nodes on `[0, radius]`.
///
/// The ball forces `radius = 1`; any other value is rejected.
pub fn make_grid(kind: DomainKind, n: usize) -> Result<Arc<RadialGrid>> {
    if let DomainKind::WholeSpaceTruncated { radius } = kind {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::BadRadius(radius));
        }
    }
    RadialGrid::new(kind, n).map(Arc::new)
}

/// Convenience constructor mirroring the `(kind, n, R)` triple of a config.
pub fn make_grid_with_radius(ball: bool, n: usize, radius: f64) -> Result<Arc<RadialGrid>> {
    if ball {
        if radius != 1.0 {
            return Err(Error::BallRadius(radius));
        }
        make_grid(DomainKind::Ball, n)
    } else {
        make_grid(DomainKind::WholeSpaceTruncated { radius }, n)
    }
}

/// Samples of a radial function on a shared grid.
#[derive(Clone, Debug)]
pub struct RadialField {
    grid: Arc<RadialGrid>,
    values: Vec<f64>,
}

impl PartialEq for RadialField {
    fn eq(&self, other: &Self) -> bool {
        self.same_grid(other) && self.values == other.values
    }
}

impl RadialField {
    pub fn new(grid: Arc<RadialGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Arc<RadialGrid>) -> Self {
        let values = vec![0.0; grid.len()];
        Self { grid, values }
    }

    pub fn constant(grid: Arc<RadialGrid>, c: f64) -> Self {
        let values = vec![c; grid.len()];
        Self { grid, values }
    }

    pub fn from_fn(grid: Arc<RadialGrid>, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.nodes().iter().map(|&r| f(r)).collect();
        Self { grid, values }
    }

    /// `1` inside `r < radius`, `0` outside. A node sitting on the jump gets
    /// the midpoint value `1/2`, which keeps integrals second-order accurate.
    pub fn indicator(grid: Arc<RadialGrid>, radius: f64) -> Self {
        let tol = 1e-9 * grid.spacing();
        Self::from_fn(grid, |r| {
            if (r - radius).abs() <= tol {
                0.5
            } else if r < radius {
                1.0
            } else {
                0.0
            }
        })
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn same_grid(&self, other: &RadialField) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid
    }

    pub fn check_grid(&self, grid: &RadialGrid) -> Result<()> {
        if std::ptr::eq(self.grid.as_ref(), grid) || *self.grid == *grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: Arc::clone(&self.grid),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    /// Index of the first node where the field rises by more than `tol`.
    pub fn first_rise(&self, tol: f64) -> Option<usize> {
        self.values
            .windows(2)
            .position(|pair| pair[1] - pair[0] > tol)
    }

    /// Largest increment `u[i+1] − u[i]`; non-positive for a non-increasing field.
    pub fn max_rise(&self) -> f64 {
        self.values
            .windows(2)
            .map(|pair| pair[1] - pair[0])
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// `∫_{ℝ³} f dx ≈ Σ w[i] f[i]`.
pub fn integrate(grid: &RadialGrid, f: &RadialField) -> Result<f64> {
    f.check_grid(grid)?;
    Ok(weighted_sum(grid, f.values()))
}

pub(crate) fn weighted_sum(grid: &RadialGrid, values: &[f64]) -> f64 {
    compensated(grid.weights().iter().zip(values).map(|(w, v)| w * v))
}

/// `(Σ w[i] |f[i]|^q)^{1/q}`.
pub fn lq_norm(f: &RadialField, q: f64) -> Result<f64> {
    if !(q.is_finite() && q >= 1.0) {
        return Err(Error::BadExponent(q));
    }
    let grid = f.grid();
    let s = compensated(
        grid.weights()
            .iter()
            .zip(f.values())
            .map(|(w, v)| w * v.abs().powf(q)),
    );
    Ok(if q == 1.0 { s } else { s.powf(1.0 / q) })
}
