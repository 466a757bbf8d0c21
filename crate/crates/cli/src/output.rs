//! Run artifacts: snapshot CSVs (with exact float round-trip), step trace
//! and observable CSVs, the provenance manifest, and optional legacy-VTK
//! structured-points files.

use anyhow::{bail, Context, Result};
use degensim_core::{Field, Grid, IntegrationTrace};
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::config::RunConfig;

/// Serialize an f64 so that parsing recovers the identical bit pattern.
/// Rust's shortest-round-trip `Display` for floats guarantees this.
fn fmt_f64(v: f64) -> String {
    let mut s = format!("{v}");
    if !s.contains(['.', 'e', 'E']) && v.is_finite() {
        s.push_str(".0");
    }
    s
}

/// Write one snapshot: header `i,j,x,y,<species...>`, one row per cell,
/// rows ordered by flat cell index.
pub fn write_snapshot(path: &Path, grid: Grid, species: &[(&str, &[f64])]) -> Result<()> {
    let mut out = String::new();
    out.push_str("i,j,x,y");
    for (name, values) in species {
        assert_eq!(values.len(), grid.num_cells());
        let _ = write!(out, ",{name}");
    }
    out.push('\n');
    for p in 1..=grid.num_cells() {
        let (i, j) = grid.inverse_order(p).expect("index in range");
        let (x, y) = grid.cell_center(i, j).expect("index in range");
        let _ = write!(out, "{i},{j},{},{}", fmt_f64(x), fmt_f64(y));
        for (_, values) in species {
            let _ = write!(out, ",{}", fmt_f64(values[p - 1]));
        }
        out.push('\n');
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

/// Parse a snapshot CSV back into per-species fields.
pub fn read_snapshot(path: &Path, grid: Grid) -> Result<Vec<(String, Field)>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines();
    let header = lines.next().context("empty snapshot file")?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < 5 || cols[..4] != ["i", "j", "x", "y"] {
        bail!("unexpected snapshot header '{header}'");
    }
    let names: Vec<String> = cols[4..].iter().map(|s| s.to_string()).collect();
    let mut fields: Vec<Vec<f64>> = vec![vec![0.0; grid.num_cells()]; names.len()];
    let mut count = 0usize;
    for line in lines {
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 4 + names.len() {
            bail!("malformed snapshot row '{line}'");
        }
        let i: usize = parts[0].parse()?;
        let j: usize = parts[1].parse()?;
        let p = grid.order(i, j).map_err(|e| anyhow::anyhow!("{e}"))?;
        for (k, f) in fields.iter_mut().enumerate() {
            f[p - 1] = parts[4 + k].parse()?;
        }
        count += 1;
    }
    if count != grid.num_cells() {
        bail!("snapshot has {count} rows, grid has {} cells", grid.num_cells());
    }
    let mut out = Vec::new();
    for (name, values) in names.into_iter().zip(fields) {
        out.push((
            name,
            Field::from_values(grid, values).map_err(|e| anyhow::anyhow!("{e}"))?,
        ));
    }
    Ok(out)
}

/// Step trace CSV: every attempted step with its outcome.
pub fn write_trace(path: &Path, trace: &IntegrationTrace) -> Result<()> {
    let mut out = String::from("t,h,accepted,err_est,lin_iters\n");
    for s in &trace.steps {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            fmt_f64(s.t),
            fmt_f64(s.h),
            s.accepted as u8,
            fmt_f64(s.error_estimate),
            s.linear_iterations
        );
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

/// Generic observables CSV: caller provides header and row tuples already
/// formatted as strings.
pub fn write_csv(path: &Path, header: &str, rows: &[Vec<String>]) -> Result<()> {
    let mut out = String::from(header);
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

pub fn csv_cell(v: f64) -> String {
    fmt_f64(v)
}

/// Run manifest: effective config echo, code version, and a hash of the
/// config for artifact identity.
pub fn write_manifest(dir: &Path, config: &RunConfig) -> Result<()> {
    let echo = toml::to_string(&config.echo()).context("serializing config echo")?;
    let mut hasher = Sha256::new();
    hasher.update(echo.as_bytes());
    let digest = hasher.finalize();
    let mut hash = String::new();
    for b in digest {
        let _ = write!(hash, "{b:02x}");
    }
    let manifest = format!(
        "version = \"{}\"\nconfig_sha256 = \"{hash}\"\n\n[config]\n{echo}",
        env!("CARGO_PKG_VERSION"),
    );
    fs::write(dir.join("manifest.toml"), manifest).context("writing manifest")
}

/// Legacy-VTK structured-points file (cell data), one per species.
pub fn write_vtk(path: &Path, grid: Grid, name: &str, values: &[f64]) -> Result<()> {
    let (n, m) = (grid.nx(), grid.ny());
    let dx = grid.dx();
    let mut out = String::new();
    out.push_str("# vtk DataFile Version 2.0\n");
    let _ = writeln!(out, "{name} snapshot");
    out.push_str("ASCII\nDATASET STRUCTURED_POINTS\n");
    let _ = writeln!(out, "DIMENSIONS {} {} 1", n + 1, m + 1);
    let _ = writeln!(out, "ORIGIN 0 0 0");
    let _ = writeln!(out, "SPACING {dx} {dx} 1");
    let _ = writeln!(out, "CELL_DATA {}", n * m);
    let _ = writeln!(out, "SCALARS {name} double 1");
    out.push_str("LOOKUP_TABLE default\n");
    // VTK cell order is x-fastest
    for j in 0..m {
        for i in 0..n {
            let _ = writeln!(out, "{}", fmt_f64(values[i * m + j]));
        }
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

/// Create the run output directory, erroring only on real IO problems.
pub fn ensure_dir(dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir.to_path_buf())
}
