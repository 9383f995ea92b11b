//! Radial operators: `(−Δ)⁻¹` by the Newton formula (free space) or the
//! Dirichlet Green's function (unit ball), and the finite-difference Laplacian.
//!
//! For a radial source the free-space potential is
//!
//! ```text
//! φ(r) = (1/r) ∫₀^r u ρ² dρ + ∫_r^R u ρ dρ,     ∂_r φ = −(1/r²) ∫₀^r u ρ² dρ
//! ```
//!
//! and on the unit ball the same expression shifted by its boundary value,
//! `φ_ball(r) = φ_free(r) − ∫₀¹ u ρ² dρ`, so that `φ_ball(1) = 0`.
//! Both radial integrals are accumulated as compensated prefix/suffix sums of
//! the exact moments of the piecewise-linear interpolant of `u`: O(N), second
//! order, and exact for piecewise-linear sources such as constants on the ball.

use std::sync::Arc;

use crate::grid::{DomainKind, RadialField, RadialGrid};
use crate::sum::CompensatedSum;
use crate::{Error, Result};

/// `φ = (−Δ)⁻¹u` together with its radial derivative.
#[derive(Clone, Debug)]
pub struct Potential {
    pub grid: Arc<RadialGrid>,
    pub phi: Vec<f64>,
    pub dphi_dr: Vec<f64>,
    /// `4π ∫₀^R u ρ² dρ` from the same prefix sums, so that
    /// `r φ(r) = mass / 4π` exactly outside the support of `u`.
    pub mass: f64,
}

impl Potential {
    pub fn as_field(&self) -> RadialField {
        RadialField::new(Arc::clone(&self.grid), self.phi.clone()).expect("grid-sized potential")
    }

    pub fn max(&self) -> f64 {
        self.phi.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// `∫ hat ρ^m dρ` over one interval `[a, a + h]`, split into the parts
/// carried by the left and right endpoint basis functions.
#[inline]
fn interval_moments(a: f64, h: f64, power: u32) -> (f64, f64) {
    match power {
        1 => (h * (a / 2.0 + h / 6.0), h * (a / 2.0 + h / 3.0)),
        2 => (
            h * (a * a / 2.0 + a * h / 3.0 + h * h / 12.0),
            h * (a * a / 2.0 + 2.0 * a * h / 3.0 + h * h / 4.0),
        ),
        _ => unreachable!("only moments 1 and 2 are used"),
    }
}

/// Returns `(A, B)` with `A[i] = ∫₀^{r_i} u ρ² dρ` and `B[i] = ∫_{r_i}^R u ρ dρ`.
fn radial_moments(u: &RadialField) -> (Vec<f64>, Vec<f64>) {
    let grid = u.grid();
    let r = grid.nodes();
    let h = grid.spacing();
    let v = u.values();
    let n = v.len();

    let mut inner = vec![0.0; n];
    let mut acc = CompensatedSum::default();
    for i in 0..n - 1 {
        let (left, right) = interval_moments(r[i], h, 2);
        acc.add(v[i] * left);
        acc.add(v[i + 1] * right);
        inner[i + 1] = acc.value();
    }

    let mut outer = vec![0.0; n];
    let mut acc = CompensatedSum::default();
    for i in (0..n - 1).rev() {
        let (left, right) = interval_moments(r[i], h, 1);
        acc.add(v[i] * left);
        acc.add(v[i + 1] * right);
        outer[i] = acc.value();
    }
    (inner, outer)
}

fn newton_potential(u: &RadialField, shift_to_zero_at_boundary: bool) -> Potential {
    let grid = Arc::clone(u.grid());
    let r = grid.nodes();
    let (inner, outer) = radial_moments(u);
    let n = r.len();
    let shift = if shift_to_zero_at_boundary {
        inner[n - 1] / r[n - 1]
    } else {
        0.0
    };

    let mut phi = vec![0.0; n];
    let mut dphi_dr = vec![0.0; n];
    phi[0] = outer[0] - shift;
    for i in 1..n {
        phi[i] = inner[i] / r[i] + outer[i] - shift;
        dphi_dr[i] = -inner[i] / (r[i] * r[i]);
    }
    if shift_to_zero_at_boundary {
        phi[n - 1] = 0.0;
    }
    let mass = 4.0 * std::f64::consts::PI * inner[n - 1];
    Potential {
        grid,
        phi,
        dphi_dr,
        mass,
    }
}

/// Free-space `(−Δ)⁻¹u` from the Newton formula, with `u` taken to vanish beyond `R`.
pub fn inverse_laplacian_free(u: &RadialField) -> Result<Potential> {
    match u.grid().kind() {
        DomainKind::WholeSpaceTruncated { .. } => Ok(newton_potential(u, false)),
        DomainKind::Ball => Err(Error::WrongDomain {
            expected: "whole-space",
        }),
    }
}

/// `(−Δ)⁻¹u` on the unit ball with `φ(1) = 0`.
pub fn inverse_laplacian_ball(u: &RadialField) -> Result<Potential> {
    match u.grid().kind() {
        DomainKind::Ball => Ok(newton_potential(u, true)),
        DomainKind::WholeSpaceTruncated { .. } => Err(Error::WrongDomain { expected: "ball" }),
    }
}

/// Dispatches on the field's domain.
pub fn inverse_laplacian(u: &RadialField) -> Potential {
    newton_potential(u, u.grid().kind().is_ball())
}

/// Stencil coefficients `(lower, diag, upper)` of `Δ_h` at node `i < n − 1`.
///
/// At the origin the symmetric limit `Δu(0) = 6 (u₁ − u₀)/h²` is used; the
/// lower coefficient is then unused and reported as zero.
#[inline]
pub(crate) fn laplacian_row(grid: &RadialGrid, i: usize) -> (f64, f64, f64) {
    let h = grid.spacing();
    let inv_h2 = 1.0 / (h * h);
    if i == 0 {
        return (0.0, -6.0 * inv_h2, 6.0 * inv_h2);
    }
    let drift = 1.0 / (grid.nodes()[i] * h);
    (inv_h2 - drift, -2.0 * inv_h2, inv_h2 + drift)
}

/// Second-order finite-difference `Δu = u'' + (2/r) u'`.
///
/// The outermost node uses one-sided second-order differences.
pub fn laplacian_radial(u: &RadialField) -> RadialField {
    let grid = u.grid();
    let v = u.values();
    let n = v.len();
    let mut out = vec![0.0; n];
    for i in 0..n - 1 {
        let (lower, diag, upper) = laplacian_row(grid, i);
        let below = if i == 0 { 0.0 } else { lower * v[i - 1] };
        out[i] = below + diag * v[i] + upper * v[i + 1];
    }
    let h = grid.spacing();
    let big_r = grid.radius();
    let k = n - 1;
    let second = (2.0 * v[k] - 5.0 * v[k - 1] + 4.0 * v[k - 2] - v[k - 3]) / (h * h);
    let first = (3.0 * v[k] - 4.0 * v[k - 1] + v[k - 2]) / (2.0 * h);
    out[k] = second + 2.0 * first / big_r;
    RadialField::new(Arc::clone(grid), out).expect("grid-sized output")
}

/// `max_i |Δ_h (−Δ)⁻¹u + u|` over interior nodes.
pub fn potential_roundtrip_residual(u: &RadialField) -> f64 {
    let phi = inverse_laplacian(u).as_field();
    let lap = laplacian_radial(&phi);
    let n = u.len();
    (1..n - 1)
        .map(|i| (lap.values()[i] + u.values()[i]).abs())
        .fold(0.0, f64::max)
}
