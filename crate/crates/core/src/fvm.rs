//! Cell-centered finite-volume assembly of the semi-discrete system and
//! its analytic Jacobian.
//!
//! Fluxes across interior faces use arithmetic averaging of the diffusion
//! coefficient at the adjacent cell centers. Boundary faces carry Neumann,
//! Dirichlet, or Robin conditions per species and edge; the Dirichlet and
//! Robin variants use ghost-point elimination at half-cell distance. The
//! state vector concatenates one field per species in the cell ordering of
//! [`Grid::order`](crate::grid::Grid::order).

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::grid::Grid;
use crate::model::{
    self, BiofilmParams, PmeParams, QsParams, Regularization,
};
use crate::sparse::StencilMatrix;

/// Boundary condition on one edge for one species.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundaryCondition {
    /// Homogeneous no-flux.
    Neumann,
    /// Fixed boundary value.
    Dirichlet(f64),
    /// `value + lambda * (outward normal derivative) = bulk`; `lambda = 0`
    /// degenerates to `Dirichlet(bulk)`.
    Robin { bulk: f64, lambda: f64 },
}

/// Per-edge conditions for one species: `west` is x=0, `east` x=L,
/// `bottom` y=0, `top` y=H.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundarySpec {
    pub west: BoundaryCondition,
    pub east: BoundaryCondition,
    pub bottom: BoundaryCondition,
    pub top: BoundaryCondition,
}

impl BoundarySpec {
    pub fn all_neumann() -> BoundarySpec {
        BoundarySpec {
            west: BoundaryCondition::Neumann,
            east: BoundaryCondition::Neumann,
            bottom: BoundaryCondition::Neumann,
            top: BoundaryCondition::Neumann,
        }
    }

    /// Biomass: no-flux on the walls and floor, absorbing top.
    pub fn biomass_default() -> BoundarySpec {
        BoundarySpec {
            top: BoundaryCondition::Dirichlet(0.0),
            ..BoundarySpec::all_neumann()
        }
    }

    /// Nutrient: no-flux on the walls and floor, bulk supply across a
    /// boundary layer of thickness `lambda` at the top.
    pub fn nutrient_default(lambda: f64) -> BoundarySpec {
        BoundarySpec {
            top: BoundaryCondition::Robin { bulk: 1.0, lambda },
            ..BoundarySpec::all_neumann()
        }
    }

    /// Autoinducer: as the nutrient but washed out (bulk 0) at the top.
    pub fn signal_default(lambda: f64) -> BoundarySpec {
        BoundarySpec {
            top: BoundaryCondition::Robin { bulk: 0.0, lambda },
            ..BoundarySpec::all_neumann()
        }
    }
}

/// Diffusion coefficient law of one species.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DiffusionLaw {
    Constant(f64),
    /// Degenerate/singular biomass coefficient of the biofilm model.
    Biomass {
        params: BiofilmParams,
        eps: Regularization,
    },
    /// Porous-medium coefficient `(u_+ + eps)^m`.
    PorousMedium {
        params: PmeParams,
        eps: Regularization,
    },
}

impl DiffusionLaw {
    pub fn value(&self, u: f64) -> f64 {
        match self {
            DiffusionLaw::Constant(d) => *d,
            DiffusionLaw::Biomass { params, eps } => {
                model::diffusion_coefficient(u, params, *eps)
            }
            DiffusionLaw::PorousMedium { params, eps } => {
                model::pme_diffusion_coefficient(u, params, *eps)
            }
        }
    }

    pub fn slope(&self, u: f64) -> f64 {
        match self {
            DiffusionLaw::Constant(_) => 0.0,
            DiffusionLaw::Biomass { params, eps } => model::diffusion_slope(u, params, *eps),
            DiffusionLaw::PorousMedium { params, eps } => {
                model::pme_diffusion_slope(u, params, *eps)
            }
        }
    }
}

/// Coupled reaction kinetics across the species of a system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReactionLaw {
    None,
    /// `+ rate * u` on species 0 only.
    LinearGrowth { rate: f64 },
    /// Monod growth/decay on species 0 (biomass) and consumption on
    /// species 1 (nutrient).
    Biofilm(BiofilmParams),
    /// Biofilm kinetics plus autoinducer production/decay on species 2.
    QuorumSensing(QsParams),
}

/// One species: its diffusion law and boundary conditions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeciesDef {
    pub diffusion: DiffusionLaw,
    pub boundary: BoundarySpec,
}

/// The spatially discretized system `dy/dt = F(y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SemiDiscreteSystem {
    pub grid: Grid,
    pub species: Vec<SpeciesDef>,
    pub reaction: ReactionLaw,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EvalError {
    DimensionMismatch { expected: usize, got: usize },
    /// A state or right-hand-side entry is NaN or infinite; the integrator
    /// treats this as a rejected step.
    NonFinite,
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalError::DimensionMismatch { expected, got } => {
                write!(f, "state length {got}, system dimension {expected}")
            }
            EvalError::NonFinite => write!(f, "non-finite value in state or right-hand side"),
        }
    }
}

/// Flux across an interior face, positive toward the right cell.
pub fn face_flux(u_left: f64, u_right: f64, d_left: f64, d_right: f64, dx: f64) -> f64 {
    (d_left + d_right) * (u_right - u_left) / (2.0 * dx)
}

/// Flux into a cell across a Dirichlet boundary face (ghost value at
/// half-cell distance).
pub fn dirichlet_boundary_flux(u_cell: f64, boundary_value: f64, d_boundary: f64, dx: f64) -> f64 {
    2.0 * d_boundary * (boundary_value - u_cell) / dx
}

/// Flux into a cell across a Robin boundary face. For `bulk_value = 1`
/// this reproduces the paper's nutrient top-boundary flux; `lambda = 0`
/// reduces to [`dirichlet_boundary_flux`].
pub fn robin_boundary_flux(c_cell: f64, bulk_value: f64, lambda: f64, d: f64, dx: f64) -> f64 {
    (d / dx)
        * (2.0 * dx * bulk_value / (2.0 * lambda + dx)
            - c_cell * (1.0 + (dx - 2.0 * lambda) / (dx + 2.0 * lambda)))
}

/// Derivative of [`robin_boundary_flux`] with respect to `c_cell`.
fn robin_flux_slope(lambda: f64, d: f64, dx: f64) -> f64 {
    -(d / dx) * (1.0 + (dx - 2.0 * lambda) / (dx + 2.0 * lambda))
}

impl SemiDiscreteSystem {
    pub fn new(grid: Grid, species: Vec<SpeciesDef>, reaction: ReactionLaw) -> SemiDiscreteSystem {
        assert!(!species.is_empty());
        SemiDiscreteSystem {
            grid,
            species,
            reaction,
        }
    }

    pub fn num_species(&self) -> usize {
        self.species.len()
    }

    /// Total state dimension, `n_s * N * M`.
    pub fn dim(&self) -> usize {
        self.species.len() * self.grid.num_cells()
    }

    fn check_state(&self, state: &[f64]) -> Result<(), EvalError> {
        if state.len() != self.dim() {
            return Err(EvalError::DimensionMismatch {
                expected: self.dim(),
                got: state.len(),
            });
        }
        if state.iter().any(|v| !v.is_finite()) {
            return Err(EvalError::NonFinite);
        }
        Ok(())
    }

    /// Evaluate `F(y)` into `out`.
    pub fn assemble_rhs(&self, state: &[f64], _t: f64, out: &mut [f64]) -> Result<(), EvalError> {
        self.check_state(state)?;
        assert_eq!(out.len(), self.dim());
        let nm = self.grid.num_cells();
        let (n, m) = (self.grid.nx(), self.grid.ny());
        let dx = self.grid.dx();

        for (s, def) in self.species.iter().enumerate() {
            let u = &state[s * nm..(s + 1) * nm];
            let r = &mut out[s * nm..(s + 1) * nm];
            // Diffusion coefficient per cell, evaluated once.
            let d: Vec<f64> = u.iter().map(|&v| def.diffusion.value(v)).collect();
            for i in 0..n {
                for j in 0..m {
                    let p = i * m + j;
                    let je = if i + 1 < n {
                        face_flux(u[p], u[p + m], d[p], d[p + m], dx)
                    } else {
                        boundary_flux(def.boundary.east, u[p], &def.diffusion, dx)
                    };
                    let jw = if i > 0 {
                        face_flux(u[p], u[p - m], d[p], d[p - m], dx)
                    } else {
                        boundary_flux(def.boundary.west, u[p], &def.diffusion, dx)
                    };
                    let jn = if j + 1 < m {
                        face_flux(u[p], u[p + 1], d[p], d[p + 1], dx)
                    } else {
                        boundary_flux(def.boundary.top, u[p], &def.diffusion, dx)
                    };
                    let js = if j > 0 {
                        face_flux(u[p], u[p - 1], d[p], d[p - 1], dx)
                    } else {
                        boundary_flux(def.boundary.bottom, u[p], &def.diffusion, dx)
                    };
                    r[p] = ((je + jw) + jn + js) / dx;
                }
            }
        }

        match &self.reaction {
            ReactionLaw::None => {}
            ReactionLaw::LinearGrowth { rate } => {
                for p in 0..nm {
                    out[p] += rate * state[p];
                }
            }
            ReactionLaw::Biofilm(params) => {
                for p in 0..nm {
                    let (u, c) = (state[p], state[nm + p]);
                    out[p] += model::biomass_reaction(u, c, params);
                    out[nm + p] -= model::nutrient_reaction(u, c, params);
                }
            }
            ReactionLaw::QuorumSensing(q) => {
                for p in 0..nm {
                    let (u, c, s) = (state[p], state[nm + p], state[2 * nm + p]);
                    out[p] += model::biomass_reaction(u, c, &q.base);
                    out[nm + p] -= model::nutrient_reaction(u, c, &q.base);
                    out[2 * nm + p] += model::signal_reaction(u, s, q);
                }
            }
        }

        if out.iter().any(|v| !v.is_finite()) {
            return Err(EvalError::NonFinite);
        }
        Ok(())
    }

    /// Analytic Jacobian `dF/dy` in diagonal storage: five diagonals per
    /// species block plus diagonal blocks coupling species through the
    /// reaction terms.
    pub fn assemble_jacobian(&self, state: &[f64], _t: f64) -> Result<StencilMatrix, EvalError> {
        self.check_state(state)?;
        let nm = self.grid.num_cells();
        let (n, m) = (self.grid.nx(), self.grid.ny());
        let dx = self.grid.dx();
        let dx2 = dx * dx;
        let mut jac = StencilMatrix::new(self.dim());

        for (s, def) in self.species.iter().enumerate() {
            let u = &state[s * nm..(s + 1) * nm];
            let base = s * nm;
            let d: Vec<f64> = u.iter().map(|&v| def.diffusion.value(v)).collect();
            let dd: Vec<f64> = u.iter().map(|&v| def.diffusion.slope(v)).collect();
            let mstride = m as isize;

            for i in 0..n {
                for j in 0..m {
                    let p = i * m + j;
                    let row = base + p;
                    // Interior faces: flux/dx = (d_p + d_q)(u_q - u_p) / (2 dx^2).
                    let do_face = |q: usize, off: isize, jac: &mut StencilMatrix| {
                        let sum_d = d[p] + d[q];
                        let diff = u[q] - u[p];
                        jac.add(row, 0, (dd[p] * diff - sum_d) / (2.0 * dx2));
                        jac.add(row, off, (dd[q] * diff + sum_d) / (2.0 * dx2));
                    };
                    let do_boundary = |bc: BoundaryCondition, jac: &mut StencilMatrix| {
                        match bc {
                            BoundaryCondition::Neumann => {}
                            BoundaryCondition::Dirichlet(v) => {
                                let db = def.diffusion.value(v);
                                jac.add(row, 0, -2.0 * db / dx2);
                            }
                            BoundaryCondition::Robin { bulk, lambda } => {
                                // flux = d(u_p)/dx * g(u_p); product rule
                                // covers nonlinear diffusion at the edge.
                                let g = 2.0 * dx * bulk / (2.0 * lambda + dx)
                                    - u[p] * (1.0 + (dx - 2.0 * lambda) / (dx + 2.0 * lambda));
                                jac.add(row, 0, dd[p] * g / dx2);
                                jac.add(row, 0, robin_flux_slope(lambda, d[p], dx) / dx);
                            }
                        }
                    };
                    if i + 1 < n {
                        do_face(p + m, mstride, &mut jac);
                    } else {
                        do_boundary(def.boundary.east, &mut jac);
                    }
                    if i > 0 {
                        do_face(p - m, -mstride, &mut jac);
                    } else {
                        do_boundary(def.boundary.west, &mut jac);
                    }
                    if j + 1 < m {
                        do_face(p + 1, 1, &mut jac);
                    } else {
                        do_boundary(def.boundary.top, &mut jac);
                    }
                    if j > 0 {
                        do_face(p - 1, -1, &mut jac);
                    } else {
                        do_boundary(def.boundary.bottom, &mut jac);
                    }
                }
            }
        }

        let snm = nm as isize;
        match &self.reaction {
            ReactionLaw::None => {}
            ReactionLaw::LinearGrowth { rate } => {
                for p in 0..nm {
                    jac.add(p, 0, *rate);
                }
            }
            ReactionLaw::Biofilm(params) => {
                self.add_biofilm_reaction_jacobian(&mut jac, state, params, nm, snm);
            }
            ReactionLaw::QuorumSensing(q) => {
                self.add_biofilm_reaction_jacobian(&mut jac, state, &q.base, nm, snm);
                for p in 0..nm {
                    let (u, s) = (state[p], state[2 * nm + p]);
                    // d(signal)/du and /ds
                    jac.add(
                        2 * nm + p,
                        -2 * snm,
                        q.alpha_s + q.beta_s * model::hill(s, q.m_hill),
                    );
                    jac.add(
                        2 * nm + p,
                        0,
                        q.beta_s * model::hill_slope(s, q.m_hill) * u - q.psi,
                    );
                }
            }
        }
        Ok(jac)
    }

    fn add_biofilm_reaction_jacobian(
        &self,
        jac: &mut StencilMatrix,
        state: &[f64],
        params: &BiofilmParams,
        nm: usize,
        snm: isize,
    ) {
        for p in 0..nm {
            let (u, c) = (state[p], state[nm + p]);
            let mon = model::monod(c, params.k_u);
            let mon_d = model::monod_slope(c, params.k_u);
            jac.add(p, 0, mon - params.k);
            jac.add(p, snm, mon_d * u);
            jac.add(nm + p, -snm, -params.nu_u * mon);
            jac.add(nm + p, 0, -params.nu_u * mon_d * u);
        }
    }

    /// The diffusion part of one species' right-hand side in operator form:
    /// a matrix `A` (coefficients frozen at `state`) and a source `b` such
    /// that `rhs_diffusion = A u + b`. Exposes the structure asserted in
    /// the paper's Remark 1: `A` is symmetric and weakly diagonally
    /// dominant with non-positive main diagonal and non-negative
    /// off-diagonals; the Robin condition contributes
    /// `b = d/dx * 2*bulk/(2 lambda + dx)` at top-row cells.
    pub fn diffusion_operator(
        &self,
        species: usize,
        state: &[f64],
    ) -> Result<(StencilMatrix, Vec<f64>), EvalError> {
        self.check_state(state)?;
        let nm = self.grid.num_cells();
        let (n, m) = (self.grid.nx(), self.grid.ny());
        let dx = self.grid.dx();
        let dx2 = dx * dx;
        let def = &self.species[species];
        let u = &state[species * nm..(species + 1) * nm];
        let d: Vec<f64> = u.iter().map(|&v| def.diffusion.value(v)).collect();

        let mut a = StencilMatrix::new(nm);
        let mut b = vec![0.0; nm];
        let mstride = m as isize;
        for i in 0..n {
            for j in 0..m {
                let p = i * m + j;
                let face = |q: usize, off: isize, a: &mut StencilMatrix| {
                    let w = (d[p] + d[q]) / (2.0 * dx2);
                    a.add(p, off, w);
                    a.add(p, 0, -w);
                };
                let boundary = |bc: BoundaryCondition, a: &mut StencilMatrix, b: &mut [f64]| {
                    match bc {
                        BoundaryCondition::Neumann => {}
                        BoundaryCondition::Dirichlet(v) => {
                            let db = def.diffusion.value(v);
                            a.add(p, 0, -2.0 * db / dx2);
                            b[p] += 2.0 * db * v / dx2;
                        }
                        BoundaryCondition::Robin { bulk, lambda } => {
                            a.add(p, 0, robin_flux_slope(lambda, d[p], dx) / dx);
                            b[p] += d[p] / dx * (2.0 * bulk / (2.0 * lambda + dx));
                        }
                    }
                };
                if i + 1 < n {
                    face(p + m, mstride, &mut a);
                } else {
                    boundary(def.boundary.east, &mut a, &mut b);
                }
                if i > 0 {
                    face(p - m, -mstride, &mut a);
                } else {
                    boundary(def.boundary.west, &mut a, &mut b);
                }
                if j + 1 < m {
                    face(p + 1, 1, &mut a);
                } else {
                    boundary(def.boundary.top, &mut a, &mut b);
                }
                if j > 0 {
                    face(p - 1, -1, &mut a);
                } else {
                    boundary(def.boundary.bottom, &mut a, &mut b);
                }
            }
        }
        Ok((a, b))
    }
}

impl crate::integrator::OdeSystem for SemiDiscreteSystem {
    fn dim(&self) -> usize {
        SemiDiscreteSystem::dim(self)
    }

    fn rhs(&self, t: f64, y: &[f64], out: &mut [f64]) -> Result<(), alloc::string::String> {
        self.assemble_rhs(y, t, out).map_err(|e| alloc::format!("{e}"))
    }

    fn jacobian(&self, t: f64, y: &[f64]) -> Result<StencilMatrix, alloc::string::String> {
        self.assemble_jacobian(y, t).map_err(|e| alloc::format!("{e}"))
    }
}

fn boundary_flux(bc: BoundaryCondition, u_cell: f64, law: &DiffusionLaw, dx: f64) -> f64 {
    match bc {
        BoundaryCondition::Neumann => 0.0,
        BoundaryCondition::Dirichlet(v) => {
            dirichlet_boundary_flux(u_cell, v, law.value(v), dx)
        }
        BoundaryCondition::Robin { bulk, lambda } => {
            robin_boundary_flux(u_cell, bulk, lambda, law.value(u_cell), dx)
        }
    }
}
