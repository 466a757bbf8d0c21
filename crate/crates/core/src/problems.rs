//! Concrete system builders for the three models, initial conditions, and
//! the Barenblatt exact-solution oracle for the porous-medium validation.

use alloc::vec;
use alloc::vec::Vec;

use crate::fvm::{
    BoundarySpec, DiffusionLaw, ReactionLaw, SemiDiscreteSystem, SpeciesDef,
};
use crate::grid::{Colony, ColonyError, Grid, initialize_colonies};
use crate::math;
use crate::model::{BiofilmParams, ParamError, PmeParams, QsParams, Regularization};

#[derive(Debug, Clone, PartialEq)]
pub enum BuildError {
    Params(ParamError),
    Colony(ColonyError),
}

impl From<ParamError> for BuildError {
    fn from(e: ParamError) -> BuildError {
        BuildError::Params(e)
    }
}

impl From<ColonyError> for BuildError {
    fn from(e: ColonyError) -> BuildError {
        BuildError::Colony(e)
    }
}

impl core::fmt::Display for BuildError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            BuildError::Params(e) => write!(f, "{e}"),
            BuildError::Colony(e) => write!(f, "{e}"),
        }
    }
}

/// Two-species biofilm system (U, C) with the wall/floor no-flux and top
/// absorbing/supply conditions. The initial state seeds biomass colonies
/// on a saturated nutrient field `C = 1`.
pub fn build_biofilm(
    grid: Grid,
    params: BiofilmParams,
    eps: Regularization,
    colonies: &[Colony],
) -> Result<(SemiDiscreteSystem, Vec<f64>), BuildError> {
    params.validate()?;
    let system = SemiDiscreteSystem::new(
        grid,
        vec![
            SpeciesDef {
                diffusion: DiffusionLaw::Biomass { params, eps },
                boundary: BoundarySpec::biomass_default(),
            },
            SpeciesDef {
                diffusion: DiffusionLaw::Constant(params.d_c),
                boundary: BoundarySpec::nutrient_default(params.lambda),
            },
        ],
        ReactionLaw::Biofilm(params),
    );
    let u = initialize_colonies(grid, colonies)?;
    let nm = grid.num_cells();
    let mut state = vec![1.0; 2 * nm];
    state[..nm].copy_from_slice(u.values());
    Ok((system, state))
}

/// Porous-medium validation problem `u_t = div((u+eps)^m grad u) + k u`,
/// all-Neumann, with the Barenblatt profile at `t0` (centered in the
/// domain) as initial condition. Integrate starting from `params.t0`.
pub fn build_pme(
    grid: Grid,
    params: PmeParams,
    eps: Regularization,
) -> Result<(SemiDiscreteSystem, Vec<f64>), BuildError> {
    params.validate()?;
    let system = SemiDiscreteSystem::new(
        grid,
        vec![SpeciesDef {
            diffusion: DiffusionLaw::PorousMedium { params, eps },
            boundary: BoundarySpec::all_neumann(),
        }],
        if params.k_growth == 0.0 {
            ReactionLaw::None
        } else {
            ReactionLaw::LinearGrowth {
                rate: params.k_growth,
            }
        },
    );
    let mut state = vec![0.0; grid.num_cells()];
    for p in 0..grid.num_cells() {
        let (i, j) = grid.inverse_order(p + 1).expect("index in range");
        let (x, y) = grid.cell_center(i, j).expect("index in range");
        state[p] = barenblatt_exact(x, y, params.t0, &params, grid);
    }
    Ok((system, state))
}

/// Three-species quorum-sensing system (U, C, S); S starts at 0, C at 1.
pub fn build_qs(
    grid: Grid,
    params: QsParams,
    eps: Regularization,
    colonies: &[Colony],
) -> Result<(SemiDiscreteSystem, Vec<f64>), BuildError> {
    params.validate()?;
    let b = params.base;
    let system = SemiDiscreteSystem::new(
        grid,
        vec![
            SpeciesDef {
                diffusion: DiffusionLaw::Biomass { params: b, eps },
                boundary: BoundarySpec::all_neumann(),
            },
            SpeciesDef {
                diffusion: DiffusionLaw::Constant(b.d_c),
                boundary: BoundarySpec::nutrient_default(b.lambda),
            },
            SpeciesDef {
                diffusion: DiffusionLaw::Constant(params.d_s),
                boundary: BoundarySpec::signal_default(b.lambda),
            },
        ],
        ReactionLaw::QuorumSensing(params),
    );
    let u = initialize_colonies(grid, colonies)?;
    let nm = grid.num_cells();
    let mut state = vec![0.0; 3 * nm];
    state[..nm].copy_from_slice(u.values());
    state[nm..2 * nm].fill(1.0);
    Ok((system, state))
}

/// Self-similar Barenblatt solution of the PME with linear source,
/// radius measured from the domain center.
pub fn barenblatt_exact(x: f64, y: f64, t: f64, params: &PmeParams, grid: Grid) -> f64 {
    let xc = grid.extent_x() / 2.0;
    let yc = grid.extent_y() / 2.0;
    barenblatt_at_radius(
        math::sqrt((x - xc) * (x - xc) + (y - yc) * (y - yc)),
        t,
        params,
    )
}

/// Barenblatt profile as a function of radius.
pub fn barenblatt_at_radius(r: f64, t: f64, params: &PmeParams) -> f64 {
    let (m, k, t0, r0) = (params.m_exp, params.k_growth, params.t0, params.r0);
    let km = k * m;
    let tau = math::exp(km * t) / km;
    let tau0 = math::exp(km * t0) / km;
    let k0_sq = r0 * r0 * math::pow(tau0, -1.0 / (m + 1.0));
    let core = m / (4.0 * (m + 1.0)) * (k0_sq - r * r * math::pow(tau, -1.0 / (m + 1.0)));
    if core <= 0.0 {
        return 0.0;
    }
    math::exp(k * t) * math::pow(tau, -1.0 / (m + 1.0)) * math::pow(core, 1.0 / m)
}

/// Radius of the support boundary at time `t`.
pub fn barenblatt_support_radius(t: f64, params: &PmeParams) -> f64 {
    let (m, k, t0, r0) = (params.m_exp, params.k_growth, params.t0, params.r0);
    let km = k * m;
    let tau = math::exp(km * t) / km;
    let tau0 = math::exp(km * t0) / km;
    let k0_sq = r0 * r0 * math::pow(tau0, -1.0 / (m + 1.0));
    math::sqrt(k0_sq * math::pow(tau, 1.0 / (m + 1.0)))
}

/// Six semi-spherical colonies on the substratum, symmetric about
/// `x = L/2`: outer spacing `0.15 L`, the innermost pair separated by
/// `1.25` times that, radius `0.055 L`.
pub fn six_colony_layout(l: f64) -> Vec<Colony> {
    let s = 0.15 * l;
    let half_gap = 1.25 * s / 2.0;
    let r = 0.055 * l;
    let a = Colony::DEFAULT_AMPLITUDE;
    let mut out = Vec::with_capacity(6);
    for offset in [half_gap, half_gap + s, half_gap + 2.0 * s] {
        for sign in [-1.0, 1.0] {
            out.push(Colony {
                x: l / 2.0 + sign * offset,
                y: 0.0,
                radius: r,
                amplitude: a,
            });
        }
    }
    out.sort_by(|a, b| a.x.partial_cmp(&b.x).expect("finite centers"));
    out
}

/// Repair rounding-scale bound violations after an accepted step: species
/// values within `tol` below `lo` (or above `hi`) snap to the bound.
/// Genuine violations beyond `tol` are left untouched so invariant checks
/// still trip on them. Higher-order ROW steps are not positivity
/// preserving and routinely undershoot empty cells by denormal-scale
/// amounts.
pub fn clamp_to_bounds(values: &mut [f64], lo: f64, hi: f64, tol: f64) {
    for v in values.iter_mut() {
        if *v < lo && *v >= lo - tol {
            *v = lo;
        } else if *v > hi && *v <= hi + tol {
            *v = hi;
        }
    }
}

/// The biofilm/QS state projection: biomass and nutrient (and signal, if
/// present) repaired to their physical ranges. `tol` bounds how far a
/// value may sit outside its range and still be snapped back; excursions
/// beyond it are left untouched so invariant checks can catch them. Pass
/// the certified componentwise error of the step (for an RMS-controlled
/// integrator, `sqrt(n) * TOL * (1 + |y|)`) or a rounding-scale constant.
pub fn project_biofilm_state(state: &mut [f64], nm: usize, tol: f64) {
    let species = state.len() / nm;
    clamp_to_bounds(&mut state[..nm], 0.0, 1.0, tol);
    clamp_to_bounds(&mut state[nm..2 * nm], 0.0, 1.0, tol);
    if species > 2 {
        clamp_to_bounds(&mut state[2 * nm..], 0.0, f64::INFINITY, tol);
    }
}

/// Single center colony for the quorum-sensing runs.
pub fn qs_colony(l: f64) -> Colony {
    Colony {
        x: l / 2.0,
        y: 0.0,
        radius: 0.1,
        amplitude: Colony::DEFAULT_AMPLITUDE,
    }
}
