//! Run configuration: TOML file format, command-line overrides, and
//! validation into ready-to-run problem definitions.

use anyhow::{bail, Context, Result};
use degensim_core::problems::{qs_colony, six_colony_layout};
use degensim_core::{BiofilmParams, Colony, Grid, PmeParams, QsParams, Regularization};
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::str::FromStr;

/// Which model a run simulates, with its full parameter set.
#[derive(Debug, Clone, PartialEq)]
pub enum Problem {
    Biofilm {
        params: BiofilmParams,
        colonies: Vec<Colony>,
    },
    Pme {
        params: PmeParams,
    },
    Qs {
        params: QsParams,
        colonies: Vec<Colony>,
    },
}

/// On-disk configuration. Every field is optional in the file; the preset
/// supplies defaults and explicit keys override them.
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub preset: Option<String>,
    /// Grid as "NxM" (cells in x and y).
    pub grid: Option<String>,
    /// Domain extents; cells must stay square (dx = l/n = h/m).
    pub l: Option<f64>,
    pub h: Option<f64>,
    pub eps: Option<f64>,
    pub tol: Option<f64>,
    pub t_end: Option<f64>,
    /// Simulation times at which snapshots are written.
    pub snapshot_times: Option<Vec<f64>>,
    pub lambda: Option<f64>,
    pub out: Option<String>,
    pub vtk: Option<bool>,
    pub deterministic: Option<bool>,
    /// Region threshold for observables needing Omega_2 membership.
    pub biofilm_threshold: Option<f64>,
}

impl FileConfig {
    pub fn from_path(path: &Path) -> Result<FileConfig> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// Later (command-line) values win over file values.
    pub fn merge(mut self, over: FileConfig) -> FileConfig {
        macro_rules! take {
            ($($f:ident),*) => { $( if over.$f.is_some() { self.$f = over.$f; } )* };
        }
        take!(
            preset, grid, l, h, eps, tol, t_end, snapshot_times, lambda, out, vtk,
            deterministic, biofilm_threshold
        );
        self
    }
}

/// Fully validated run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub preset: String,
    pub problem: Problem,
    pub grid: Grid,
    pub eps: Regularization,
    pub tol: f64,
    pub t_end: f64,
    pub snapshot_times: Vec<f64>,
    pub out: String,
    pub vtk: bool,
    pub deterministic: bool,
    pub biofilm_threshold: f64,
}

pub const PRESETS: &[&str] = &[
    "biofilm-6colony",
    "biofilm-nutrient-limited",
    "pme-barenblatt",
    "qs-sweep",
];

fn parse_grid(s: &str) -> Result<(usize, usize)> {
    let (a, b) = s
        .split_once(['x', 'X'])
        .with_context(|| format!("grid '{s}' is not of the form NxM"))?;
    let n = usize::from_str(a.trim()).with_context(|| format!("grid '{s}'"))?;
    let m = usize::from_str(b.trim()).with_context(|| format!("grid '{s}'"))?;
    Ok((n, m))
}

impl RunConfig {
    pub fn from_file(file: &FileConfig) -> Result<RunConfig> {
        let preset = file
            .preset
            .clone()
            .unwrap_or_else(|| "biofilm-6colony".into());
        if !PRESETS.contains(&preset.as_str()) {
            bail!(
                "unknown preset '{preset}' (available: {})",
                PRESETS.join(", ")
            );
        }

        let (default_n, default_t_end): (usize, f64) = match preset.as_str() {
            "pme-barenblatt" => (64, 1.0),
            "qs-sweep" => (64, 40.0),
            _ => (64, 6.0),
        };
        let (n, m) = match &file.grid {
            Some(s) => parse_grid(s)?,
            None => (default_n, default_n),
        };
        let l = file.l.unwrap_or(1.0);
        let h = file.h.unwrap_or(1.0);
        let grid = Grid::new(n, m, l, h).map_err(|e| anyhow::anyhow!("{e}"))?;

        let eps = Regularization::new(file.eps.unwrap_or(0.0))
            .map_err(|e| anyhow::anyhow!("{e}"))?;
        let tol = file.tol.unwrap_or(1e-6);
        if !(tol > 0.0 && tol.is_finite()) {
            bail!("tol = {tol} must be positive and finite");
        }
        let t_end = file.t_end.unwrap_or(default_t_end);
        if !(t_end.is_finite() && t_end >= 0.0) {
            bail!("t_end = {t_end} must be non-negative");
        }
        let lambda = file.lambda.unwrap_or(0.0);
        if !(lambda >= 0.0) {
            bail!("lambda = {lambda} must be non-negative");
        }

        let problem = match preset.as_str() {
            "biofilm-6colony" => Problem::Biofilm {
                params: BiofilmParams {
                    lambda,
                    ..BiofilmParams::default()
                },
                colonies: six_colony_layout(l),
            },
            "biofilm-nutrient-limited" => Problem::Biofilm {
                params: BiofilmParams {
                    lambda,
                    ..BiofilmParams::nutrient_limited()
                },
                colonies: six_colony_layout(l),
            },
            "pme-barenblatt" => Problem::Pme {
                params: PmeParams::default(),
            },
            "qs-sweep" => Problem::Qs {
                params: QsParams {
                    base: BiofilmParams {
                        lambda,
                        ..BiofilmParams::default()
                    },
                    ..QsParams::default()
                },
                colonies: vec![qs_colony(l)],
            },
            _ => unreachable!(),
        };
        match &problem {
            Problem::Biofilm { params, .. } => params.validate(),
            Problem::Pme { params } => params.validate(),
            Problem::Qs { params, .. } => params.validate(),
        }
        .map_err(|e| anyhow::anyhow!("{e}"))?;

        let mut snapshot_times = file.snapshot_times.clone().unwrap_or_default();
        snapshot_times.retain(|t| t.is_finite() && *t >= 0.0 && *t <= t_end);
        snapshot_times.sort_by(|a, b| a.partial_cmp(b).expect("finite times"));

        Ok(RunConfig {
            preset,
            problem,
            grid,
            eps,
            tol,
            t_end,
            snapshot_times,
            out: file.out.clone().unwrap_or_else(|| "out".into()),
            vtk: file.vtk.unwrap_or(false),
            deterministic: file.deterministic.unwrap_or(true),
            biofilm_threshold: file.biofilm_threshold.unwrap_or(1e-3),
        })
    }

    /// Serializable echo of the effective configuration, written into the
    /// run manifest.
    pub fn echo(&self) -> FileConfig {
        FileConfig {
            preset: Some(self.preset.clone()),
            grid: Some(format!("{}x{}", self.grid.nx(), self.grid.ny())),
            l: Some(self.grid.extent_x()),
            h: Some(self.grid.extent_y()),
            eps: Some(self.eps.epsilon()),
            tol: Some(self.tol),
            t_end: Some(self.t_end),
            snapshot_times: Some(self.snapshot_times.clone()),
            lambda: Some(match &self.problem {
                Problem::Biofilm { params, .. } => params.lambda,
                Problem::Qs { params, .. } => params.base.lambda,
                Problem::Pme { .. } => 0.0,
            }),
            out: Some(self.out.clone()),
            vtk: Some(self.vtk),
            deterministic: Some(self.deterministic),
            biofilm_threshold: Some(self.biofilm_threshold),
        }
    }

    pub fn species_names(&self) -> &'static [&'static str] {
        match self.problem {
            Problem::Biofilm { .. } => &["u", "c"],
            Problem::Pme { .. } => &["u"],
            Problem::Qs { .. } => &["u", "c", "s"],
        }
    }
}
