//! Radial finite-difference laboratory for the nonlocal diffusion equation
//!
//! ```text
//! ∂t u = ((−Δ)⁻¹u) Δu + α u²,   x ∈ ℝ³ (or the unit ball), u radial
//! ```
//!
//! The crate is organized bottom-up:
//!
//! - [`grid`]: uniform radial mesh, 3D quadrature and the [`RadialField`] container.
//! - [`operators`]: exact-formula inverse Laplacians and the radial Laplacian stencil.
//! - [`tridiag`]: the Thomas solver used by the implicit step.
//! - [`stepper`]: frozen-coefficient backward Euler step, Picard iteration and the adaptive driver.
//! - [`diagnostics`]: conservation residuals, norm ladders, potential bounds and decay trends.
//! - [`scenarios`]: initial data families, regime sweeps and convergence studies.
//! - [`io`]: configuration documents, CSV time series, snapshots and run manifests.
//! - [`verify`]: the acceptance checks run by `nldiff verify`.

pub mod diagnostics;
pub mod error;
pub mod grid;
pub mod io;
pub mod operators;
pub mod scenarios;
pub mod stepper;
pub mod tridiag;
pub mod verify;

mod sum;

pub use diagnostics::Trajectory;
pub use error::{Error, Result};
pub use grid::{DomainKind, RadialField, RadialGrid};
pub use operators::Potential;
pub use stepper::{RunStatus, SolverConfig, StepReport};
