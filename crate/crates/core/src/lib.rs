//! Simulation core for density-dependent degenerate diffusion-reaction
//! systems on uniform 2D grids.
//!
//! The crate covers the full pipeline from spatial discretization to time
//! integration:
//!
//! * [`grid`] — cell-centered uniform grids, index ordering, field storage;
//! * [`model`] — diffusion coefficients (degenerate and regularized) and
//!   reaction kinetics for biofilm, porous-medium, and quorum-sensing models;
//! * [`fvm`] — finite-volume assembly of the semi-discrete right-hand side
//!   and its analytic Jacobian;
//! * [`sparse`] — diagonal-format sparse matrices and a BiCGSTAB solver;
//! * [`integrator`] — embedded Rosenbrock-Wanner stepping with adaptive,
//!   error-controlled step size;
//! * [`problems`] — ready-made systems for the three model problems plus the
//!   Barenblatt closed-form solution;
//! * [`observables`] — error norms, interface tracking, induction event
//!   times, biomass integrals, and quadratic regression.
//!
//! The crate is `no_std` (with `alloc`); all file IO and experiment
//! orchestration lives in the companion CLI crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod fvm;
pub mod grid;
pub mod integrator;
pub mod model;
pub mod observables;
pub mod problems;
pub mod sparse;

mod math;

pub use fvm::{
    BoundaryCondition, BoundarySpec, DiffusionLaw, ReactionLaw, SemiDiscreteSystem, SpeciesDef,
};
pub use grid::{Colony, Field, Grid};
pub use integrator::{IntegrationTrace, OdeSystem, RowTableau, StepController};
pub use model::{BiofilmParams, PmeParams, QsParams, Regularization};
pub use sparse::{SolveReport, StencilMatrix};
