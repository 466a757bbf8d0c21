//! Experiment drivers behind the CLI subcommands: single runs, the two
//! convergence studies, the exact-solution validation, and the
//! quorum-sensing domain-size sweep.

use std::ops::ControlFlow;
use std::path::Path;

use anyhow::{anyhow, bail, Result};
use degensim_core::integrator::{integrate, IntegrationTrace};
use degensim_core::observables::{
    interface_height, quad_fit, refinement_error, scaled_l2_error, total_biomass, QsEventDetector,
    QsEventTimes, QuadFit,
};
use degensim_core::problems::{
    barenblatt_exact, build_biofilm, build_pme, build_qs, project_biofilm_state, qs_colony,
};
use degensim_core::{
    Field, Grid, PmeParams, Regularization, RowTableau, SemiDiscreteSystem, StepController,
};

use crate::config::{Problem, RunConfig};
use crate::output::{
    csv_cell, ensure_dir, write_csv, write_manifest, write_snapshot, write_trace, write_vtk,
};

/// Marker error for integration failures, so the CLI can map them to a
/// distinct exit code from configuration errors.
#[derive(Debug)]
pub struct IntegrationAbort(pub String);

impl std::fmt::Display for IntegrationAbort {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "integration failed: {}", self.0)
    }
}

impl std::error::Error for IntegrationAbort {}

/// Everything a single simulation produces in memory.
pub struct SimOutput {
    pub grid: Grid,
    /// Requested capture times paired with the state at each.
    pub captures: Vec<(f64, Vec<f64>)>,
    pub final_time: f64,
    pub final_state: Vec<f64>,
    pub trace: IntegrationTrace,
    pub events: Option<QsEventTimes>,
    /// Accepted steps whose state violated physical bounds beyond
    /// rounding tolerance (before projection).
    pub bounds_violations: usize,
    /// Biomass mass after every accepted step (species 0).
    pub mass_series: Vec<(f64, f64)>,
}

fn build(
    problem: &Problem,
    grid: Grid,
    eps: Regularization,
) -> Result<(SemiDiscreteSystem, Vec<f64>, f64)> {
    match problem {
        Problem::Biofilm { params, colonies } => {
            let (sys, state) = build_biofilm(grid, *params, eps, colonies)
                .map_err(|e| anyhow!("{e}"))?;
            Ok((sys, state, 0.0))
        }
        Problem::Pme { params } => {
            let (sys, state) = build_pme(grid, *params, eps).map_err(|e| anyhow!("{e}"))?;
            Ok((sys, state, params.t0))
        }
        Problem::Qs { params, colonies } => {
            let (sys, state) = build_qs(grid, *params, eps, colonies)
                .map_err(|e| anyhow!("{e}"))?;
            Ok((sys, state, 0.0))
        }
    }
}

fn is_cellwise_bounded(problem: &Problem) -> bool {
    matches!(problem, Problem::Biofilm { .. } | Problem::Qs { .. })
}

/// Run one simulation to `t_end`, landing exactly on every capture time.
pub fn simulate(
    problem: &Problem,
    grid: Grid,
    eps: Regularization,
    tol: f64,
    t_end: f64,
    capture_times: &[f64],
    biofilm_threshold: f64,
    stop_on_events: bool,
) -> Result<SimOutput> {
    let (sys, mut state, t0) = build(problem, grid, eps)?;
    let nm = grid.num_cells();
    let tableau = RowTableau::row3();
    let mut controller = StepController::new(tol);
    controller.h_initial = 1e-6;

    let mut detector = match problem {
        Problem::Qs { .. } => Some(QsEventDetector::new(1.0, biofilm_threshold)),
        _ => None,
    };
    let project = is_cellwise_bounded(problem);

    // segment boundaries: t0 < captures <= t_end
    let mut marks: Vec<f64> = capture_times
        .iter()
        .copied()
        .filter(|t| *t > t0 && *t < t_end)
        .collect();
    marks.push(t_end);
    marks.sort_by(|a, b| a.partial_cmp(b).expect("finite times"));
    marks.dedup();

    let mut out = SimOutput {
        grid,
        captures: Vec::new(),
        final_time: t0,
        final_state: state.clone(),
        trace: IntegrationTrace::default(),
        events: None,
        bounds_violations: 0,
        mass_series: Vec::new(),
    };

    let mut t = t0;
    let mut stopped = false;
    for mark in marks {
        if stopped {
            break;
        }
        let mut violations = 0usize;
        let mut masses: Vec<(f64, f64)> = Vec::new();
        let detector_ref = &mut detector;
        let segment = integrate(
            &sys,
            &tableau,
            &controller,
            t,
            mark,
            &mut state,
            |tt, y: &mut [f64]| {
                if project {
                    // audit before repairing: the RMS-controlled estimate
                    // certifies componentwise errors up to
                    // sqrt(n) * TOL * (1 + |y|); anything beyond that is a
                    // real violation, anything below is accuracy-level
                    // noise snapped back onto the invariant region
                    let bound_tol = (y.len() as f64).sqrt() * tol * 2.0;
                    for &v in y[..2 * nm].iter() {
                        if !(-bound_tol..=1.0 + bound_tol).contains(&v) {
                            violations += 1;
                        }
                    }
                    project_biofilm_state(y, nm, bound_tol);
                }
                masses.push((tt, y[..nm].iter().sum::<f64>() * grid.dx() * grid.dx()));
                if let Some(det) = detector_ref.as_mut() {
                    let u = Field::from_values(grid, y[..nm].to_vec()).expect("sized");
                    let s = Field::from_values(grid, y[2 * nm..3 * nm].to_vec()).expect("sized");
                    det.observe(tt, &u, &s);
                    if stop_on_events && det.complete() {
                        return ControlFlow::Break(());
                    }
                }
                ControlFlow::Continue(())
            },
        )
        .map_err(|e| anyhow::Error::new(IntegrationAbort(format!("{e}"))))?;
        out.bounds_violations += violations;
        out.mass_series.extend(masses);
        merge_trace(&mut out.trace, segment);
        let reached = out
            .mass_series
            .last()
            .map(|(tt, _)| *tt)
            .unwrap_or(mark);
        if reached < mark {
            stopped = true;
            t = reached;
        } else {
            t = mark;
        }
        if capture_times.contains(&t) {
            out.captures.push((t, state.clone()));
        }
    }
    out.final_time = t;
    out.final_state = state;
    out.events = detector.map(|d| d.events());
    Ok(out)
}

fn merge_trace(into: &mut IntegrationTrace, seg: IntegrationTrace) {
    into.steps.extend(seg.steps);
    into.accepted += seg.accepted;
    into.rejected += seg.rejected;
    into.rhs_evaluations += seg.rhs_evaluations;
    into.jacobian_evaluations += seg.jacobian_evaluations;
    into.linear_iterations += seg.linear_iterations;
}

fn species_slices<'a>(state: &'a [f64], names: &[&'static str], nm: usize) -> Vec<(&'static str, &'a [f64])> {
    names
        .iter()
        .enumerate()
        .map(|(k, name)| (*name, &state[k * nm..(k + 1) * nm]))
        .collect()
}

/// `run` subcommand: simulate, write snapshots/trace/observables/manifest.
pub fn run(cfg: &RunConfig) -> Result<SimOutput> {
    let dir = ensure_dir(Path::new(&cfg.out))?;
    write_manifest(&dir, cfg)?;
    let sim = simulate(
        &cfg.problem,
        cfg.grid,
        cfg.eps,
        cfg.tol,
        cfg.t_end,
        &cfg.snapshot_times,
        cfg.biofilm_threshold,
        false,
    )?;
    let nm = cfg.grid.num_cells();
    let names = cfg.species_names();

    for (t, state) in sim
        .captures
        .iter()
        .chain(std::iter::once(&(sim.final_time, sim.final_state.clone())))
    {
        let label = format!("{t}").replace('.', "_");
        let path = dir.join(format!("snapshot-t{label}.csv"));
        write_snapshot(&path, cfg.grid, &species_slices(state, names, nm))?;
        if cfg.vtk {
            for (name, values) in species_slices(state, names, nm) {
                write_vtk(
                    &dir.join(format!("snapshot-t{label}-{name}.vtk")),
                    cfg.grid,
                    name,
                    values,
                )?;
            }
        }
    }
    write_trace(&dir.join("trace.csv"), &sim.trace)?;

    let mut rows: Vec<Vec<String>> = sim
        .mass_series
        .iter()
        .map(|(t, m)| vec![cfg.preset.clone(), csv_cell(*t), csv_cell(*m)])
        .collect();
    // summary observables depending on the problem
    if let Problem::Pme { params } = &cfg.problem {
        let err = pme_error_vs_exact(cfg.grid, &sim.final_state, sim.final_time, params)?;
        rows.push(vec![
            format!("{}-error-vs-exact", cfg.preset),
            csv_cell(sim.final_time),
            csv_cell(err),
        ]);
    }
    if is_cellwise_bounded(&cfg.problem) {
        let max_u = sim.final_state[..nm]
            .iter()
            .fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        rows.push(vec![
            format!("{}-max-u", cfg.preset),
            csv_cell(sim.final_time),
            csv_cell(max_u),
        ]);
        let u = Field::from_values(cfg.grid, sim.final_state[..nm].to_vec()).expect("sized");
        rows.push(vec![
            format!("{}-interface-height", cfg.preset),
            csv_cell(sim.final_time),
            csv_cell(interface_height(
                &u,
                cfg.grid.extent_x() / 2.0,
                cfg.biofilm_threshold,
            )),
        ]);
    }
    write_csv(&dir.join("observables.csv"), "experiment,t,value", &rows)?;
    Ok(sim)
}

pub fn pme_error_vs_exact(
    grid: Grid,
    state: &[f64],
    t: f64,
    params: &PmeParams,
) -> Result<f64> {
    let numeric = Field::from_values(grid, state.to_vec()).map_err(|e| anyhow!("{e}"))?;
    let mut exact = Field::zeros(grid);
    for p in 1..=grid.num_cells() {
        let (i, j) = grid.inverse_order(p).expect("index in range");
        let (x, y) = grid.cell_center(i, j).expect("index in range");
        exact.values_mut()[p - 1] = barenblatt_exact(x, y, t, params, grid);
    }
    scaled_l2_error(&numeric, &exact).map_err(|e| anyhow!("{e}"))
}

/// One row of the Barenblatt validation table.
#[derive(Debug, Clone, Copy)]
pub struct BarenblattRow {
    pub n: usize,
    pub error: f64,
    pub elapsed_s: f64,
}

/// `barenblatt` subcommand: exact-solution validation over a grid list.
pub fn barenblatt_validate(cfg: &RunConfig, grids: &[usize]) -> Result<Vec<BarenblattRow>> {
    let Problem::Pme { params } = &cfg.problem else {
        bail!("barenblatt validation requires the pme-barenblatt preset");
    };
    let mut rows = Vec::new();
    for &n in grids {
        let grid = Grid::square(n, cfg.grid.extent_x()).map_err(|e| anyhow!("{e}"))?;
        let start = std::time::Instant::now();
        let sim = simulate(
            &cfg.problem,
            grid,
            cfg.eps,
            cfg.tol,
            cfg.t_end,
            &[],
            cfg.biofilm_threshold,
            false,
        )?;
        let error = pme_error_vs_exact(grid, &sim.final_state, sim.final_time, params)?;
        rows.push(BarenblattRow {
            n,
            error,
            elapsed_s: start.elapsed().as_secs_f64(),
        });
    }
    Ok(rows)
}

/// One row of the ε-convergence table.
#[derive(Debug, Clone, Copy)]
pub struct EpsRow {
    pub eps: f64,
    /// Per-species scaled L2 distance to the reference (ε = 0) run.
    pub error_u: f64,
    pub error_c: Option<f64>,
}

/// `converge-eps` subcommand: compare regularized runs against the ε = 0
/// reference at `t_end`.
pub fn converge_eps(cfg: &RunConfig, eps_list: &[f64]) -> Result<Vec<EpsRow>> {
    let reference = simulate(
        &cfg.problem,
        cfg.grid,
        Regularization::NONE,
        cfg.tol,
        cfg.t_end,
        &[],
        cfg.biofilm_threshold,
        false,
    )?;
    let nm = cfg.grid.num_cells();
    let species = cfg.species_names().len();
    let mut rows = Vec::new();
    for &e in eps_list {
        let eps = Regularization::new(e).map_err(|e| anyhow!("{e}"))?;
        let sim = simulate(
            &cfg.problem,
            cfg.grid,
            eps,
            cfg.tol,
            cfg.t_end,
            &[],
            cfg.biofilm_threshold,
            false,
        )?;
        let field = |state: &[f64], k: usize| {
            Field::from_values(cfg.grid, state[k * nm..(k + 1) * nm].to_vec()).expect("sized")
        };
        let error_u = scaled_l2_error(&field(&sim.final_state, 0), &field(&reference.final_state, 0))
            .map_err(|e| anyhow!("{e}"))?;
        let error_c = if species > 1 {
            Some(
                scaled_l2_error(&field(&sim.final_state, 1), &field(&reference.final_state, 1))
                    .map_err(|e| anyhow!("{e}"))?,
            )
        } else {
            None
        };
        rows.push(EpsRow {
            eps: e,
            error_u,
            error_c,
        });
    }
    Ok(rows)
}

/// One row of the grid-refinement table.
#[derive(Debug, Clone)]
pub struct RefinementRow {
    pub kappa: u32,
    pub t: f64,
    pub error_u: f64,
    pub error_c: Option<f64>,
    pub elapsed_s: f64,
}

/// `converge-grid` subcommand: consecutive-grid differences at the
/// requested times over `2^kappa` grids.
pub fn converge_grid(cfg: &RunConfig, kappas: &[u32], times: &[f64]) -> Result<Vec<RefinementRow>> {
    if kappas.len() < 2 {
        bail!("grid convergence needs at least two kappa values");
    }
    let nm_species = cfg.species_names().len();
    // states per kappa: map time -> per-species fields
    let mut per_kappa: Vec<(u32, f64, Vec<(f64, Vec<Field>)>)> = Vec::new();
    let t_max = times.iter().fold(0.0f64, |a, &b| a.max(b));
    for &kappa in kappas {
        let n = 1usize << kappa;
        let grid = Grid::square(n, cfg.grid.extent_x()).map_err(|e| anyhow!("{e}"))?;
        let start = std::time::Instant::now();
        let sim = simulate(
            &cfg.problem,
            grid,
            cfg.eps,
            cfg.tol,
            t_max,
            times,
            cfg.biofilm_threshold,
            false,
        )?;
        let nm = grid.num_cells();
        let mut captured: Vec<(f64, Vec<Field>)> = Vec::new();
        for (t, state) in sim
            .captures
            .iter()
            .chain(std::iter::once(&(sim.final_time, sim.final_state.clone())))
        {
            if !times.contains(t) || captured.iter().any(|(ct, _)| ct == t) {
                continue;
            }
            let fields = (0..nm_species)
                .map(|k| {
                    Field::from_values(grid, state[k * nm..(k + 1) * nm].to_vec()).expect("sized")
                })
                .collect();
            captured.push((*t, fields));
        }
        per_kappa.push((kappa, start.elapsed().as_secs_f64(), captured));
    }

    let mut rows = Vec::new();
    for w in per_kappa.windows(2) {
        let (coarse_kappa, _, coarse_states) = &w[0];
        let (fine_kappa, fine_elapsed, fine_states) = &w[1];
        let _ = coarse_kappa;
        for (t, fine_fields) in fine_states {
            let Some((_, coarse_fields)) = coarse_states
                .iter()
                .find(|(ct, _)| ct == t)
            else {
                continue;
            };
            let error_u = refinement_error(&fine_fields[0], &coarse_fields[0])
                .map_err(|e| anyhow!("{e}"))?;
            let error_c = if nm_species > 1 {
                Some(
                    refinement_error(&fine_fields[1], &coarse_fields[1])
                        .map_err(|e| anyhow!("{e}"))?,
                )
            } else {
                None
            };
            rows.push(RefinementRow {
                kappa: *fine_kappa,
                t: *t,
                error_u,
                error_c,
                elapsed_s: *fine_elapsed,
            });
        }
    }
    Ok(rows)
}

/// One point of the quorum-sensing domain-size sweep.
#[derive(Debug, Clone)]
pub struct QsSweepRow {
    pub l: f64,
    pub events: QsEventTimes,
    pub final_mass: f64,
}

pub struct QsSweepResult {
    pub rows: Vec<QsSweepRow>,
    /// Quadratic fits of T1..T4 over L (only over fully detected rows).
    pub t_fits: Vec<Option<QuadFit>>,
    pub censored: usize,
}

/// `qs-sweep` subcommand: grow the domain length L at fixed H and dx,
/// tracking induction events.
pub fn qs_sweep(cfg: &RunConfig, l_list: &[f64]) -> Result<QsSweepResult> {
    let Problem::Qs { params, .. } = &cfg.problem else {
        bail!("qs sweep requires the qs-sweep preset");
    };
    let m = cfg.grid.ny();
    let h = cfg.grid.extent_y();
    let dx = h / m as f64;
    let mut rows = Vec::new();
    for &l in l_list {
        let n = (l / dx).round() as usize;
        if ((n as f64) * dx - l).abs() > 1e-9 {
            bail!("L = {l} is not an integer multiple of dx = {dx}");
        }
        let grid = Grid::new(n, m, l, h).map_err(|e| anyhow!("{e}"))?;
        let problem = Problem::Qs {
            params: *params,
            colonies: vec![qs_colony(l)],
        };
        let sim = simulate(
            &problem,
            grid,
            cfg.eps,
            cfg.tol,
            cfg.t_end,
            &[],
            cfg.biofilm_threshold,
            true,
        )?;
        let nm = grid.num_cells();
        let u = Field::from_values(grid, sim.final_state[..nm].to_vec()).expect("sized");
        rows.push(QsSweepRow {
            l,
            events: sim.events.expect("qs run has a detector"),
            final_mass: total_biomass(&u),
        });
    }

    let mut t_fits = Vec::new();
    let mut censored = 0;
    for pick in [
        |e: &QsEventTimes| e.t1,
        |e: &QsEventTimes| e.t2,
        |e: &QsEventTimes| e.t3,
        |e: &QsEventTimes| e.t4,
    ] {
        let pts: Vec<(f64, f64)> = rows
            .iter()
            .filter_map(|r| pick(&r.events).map(|t| (r.l, t)))
            .collect();
        censored += rows.len() - pts.len();
        t_fits.push(if pts.len() >= 3 {
            quad_fit(&pts).ok()
        } else {
            None
        });
    }
    Ok(QsSweepResult {
        rows,
        t_fits,
        censored,
    })
}

/// Write experiment tables as CSV into the output directory.
pub fn write_barenblatt_table(dir: &Path, rows: &[BarenblattRow]) -> Result<()> {
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.n.to_string(),
                csv_cell(r.error),
                csv_cell(r.elapsed_s),
            ]
        })
        .collect();
    write_csv(&dir.join("barenblatt.csv"), "n,error,elapsed_s", &body)
}

pub fn write_eps_table(dir: &Path, rows: &[EpsRow]) -> Result<()> {
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                csv_cell(r.eps),
                csv_cell(r.error_u),
                r.error_c.map(csv_cell).unwrap_or_default(),
            ]
        })
        .collect();
    write_csv(&dir.join("eps-convergence.csv"), "eps,error_u,error_c", &body)
}

pub fn write_refinement_table(dir: &Path, rows: &[RefinementRow]) -> Result<()> {
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.kappa.to_string(),
                csv_cell(r.t),
                csv_cell(r.error_u),
                r.error_c.map(csv_cell).unwrap_or_default(),
                csv_cell(r.elapsed_s),
            ]
        })
        .collect();
    write_csv(
        &dir.join("grid-convergence.csv"),
        "kappa,t,error_u,error_c,elapsed_s",
        &body,
    )
}

pub fn write_qs_table(dir: &Path, result: &QsSweepResult) -> Result<()> {
    let opt = |v: Option<f64>| v.map(csv_cell).unwrap_or_else(|| "censored".into());
    let body: Vec<Vec<String>> = result
        .rows
        .iter()
        .map(|r| {
            vec![
                csv_cell(r.l),
                opt(r.events.t1),
                opt(r.events.t2),
                opt(r.events.t3),
                opt(r.events.t4),
                opt(r.events.m1),
                opt(r.events.m2),
                opt(r.events.m3),
                opt(r.events.m4),
                csv_cell(r.final_mass),
            ]
        })
        .collect();
    write_csv(
        &dir.join("qs-sweep.csv"),
        "l,t1,t2,t3,t4,m1,m2,m3,m4,final_mass",
        &body,
    )?;
    let fits: Vec<Vec<String>> = result
        .t_fits
        .iter()
        .enumerate()
        .filter_map(|(k, f)| {
            f.map(|f| {
                vec![
                    format!("t{}", k + 1),
                    csv_cell(f.a),
                    csv_cell(f.b),
                    csv_cell(f.c),
                    csv_cell(f.rms),
                ]
            })
        })
        .collect();
    write_csv(&dir.join("qs-fits.csv"), "event,a,b,c,rms", &fits)
}
