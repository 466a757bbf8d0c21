//! Uniform 2D cell-centered grid, lexicographic index ordering, and field
//! storage shared by all problems.
//!
//! Indices are 1-based at the API surface: cell `(i, j)` with `1 <= i <= N`
//! (x direction) and `1 <= j <= M` (y direction). The flat ordering runs
//! column by column, `p = (i-1)*M + j`, so the off-diagonal offsets of the
//! assembled stencil operators are `±1` within a column and `±M` across
//! columns. For the square grids used in every experiment this is the
//! classical lexicographic map `p = (i-1)*N + j`.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::math;

#[derive(Debug, Clone, PartialEq)]
pub enum GridError {
    /// L/N and H/M disagree beyond 1e-12 relative.
    AspectMismatch { dx: f64, dy: f64 },
    /// Fewer than 2 cells along a direction.
    TooCoarse { n: usize, m: usize },
    /// Non-positive domain extent.
    BadExtent { l: f64, h: f64 },
    /// Cell index outside `1..=N` x `1..=M` or flat index outside `1..=N*M`.
    IndexOutOfRange,
}

impl fmt::Display for GridError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GridError::AspectMismatch { dx, dy } => {
                write!(f, "grid spacing mismatch: L/N = {dx}, H/M = {dy}")
            }
            GridError::TooCoarse { n, m } => write!(f, "grid must be at least 2x2, got {n}x{m}"),
            GridError::BadExtent { l, h } => write!(f, "domain extents must be positive: {l}x{h}"),
            GridError::IndexOutOfRange => write!(f, "cell index out of range"),
        }
    }
}

/// Uniform cell-centered grid over `[0, L] x [0, H]` with square cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    n: usize,
    m: usize,
    l: f64,
    h: f64,
    dx: f64,
}

impl Grid {
    pub fn new(n: usize, m: usize, l: f64, h: f64) -> Result<Grid, GridError> {
        if n < 2 || m < 2 {
            return Err(GridError::TooCoarse { n, m });
        }
        if !(l > 0.0) || !(h > 0.0) {
            return Err(GridError::BadExtent { l, h });
        }
        let dx = l / n as f64;
        let dy = h / m as f64;
        if math::abs(dx - dy) > 1e-12 * math::max(dx, dy) {
            return Err(GridError::AspectMismatch { dx, dy });
        }
        Ok(Grid { n, m, l, h, dx })
    }

    /// Square grid over the unit square-like domain `[0, l] x [0, l]`.
    pub fn square(n: usize, l: f64) -> Result<Grid, GridError> {
        Grid::new(n, n, l, l)
    }

    pub fn nx(&self) -> usize {
        self.n
    }

    pub fn ny(&self) -> usize {
        self.m
    }

    pub fn num_cells(&self) -> usize {
        self.n * self.m
    }

    pub fn extent_x(&self) -> f64 {
        self.l
    }

    pub fn extent_y(&self) -> f64 {
        self.h
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// Flat index of cell `(i, j)`, 1-based on both sides.
    pub fn order(&self, i: usize, j: usize) -> Result<usize, GridError> {
        if i < 1 || i > self.n || j < 1 || j > self.m {
            return Err(GridError::IndexOutOfRange);
        }
        Ok((i - 1) * self.m + j)
    }

    /// Inverse of [`Grid::order`].
    pub fn inverse_order(&self, p: usize) -> Result<(usize, usize), GridError> {
        if p < 1 || p > self.num_cells() {
            return Err(GridError::IndexOutOfRange);
        }
        let i = (p - 1) / self.m + 1;
        let j = (p - 1) % self.m + 1;
        Ok((i, j))
    }

    /// Center coordinates of cell `(i, j)`.
    pub fn cell_center(&self, i: usize, j: usize) -> Result<(f64, f64), GridError> {
        if i < 1 || i > self.n || j < 1 || j > self.m {
            return Err(GridError::IndexOutOfRange);
        }
        Ok(((i as f64 - 0.5) * self.dx, (j as f64 - 0.5) * self.dx))
    }
}

/// Cell-centered scalar field for one species.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: Grid) -> Field {
        Field {
            grid,
            values: vec![0.0; grid.num_cells()],
        }
    }

    pub fn constant(grid: Grid, value: f64) -> Field {
        Field {
            grid,
            values: vec![value; grid.num_cells()],
        }
    }

    /// Wraps an existing flat vector; length must be `N*M`.
    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Field, GridError> {
        if values.len() != grid.num_cells() {
            return Err(GridError::IndexOutOfRange);
        }
        Ok(Field { grid, values })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Value at cell `(i, j)`.
    pub fn at(&self, i: usize, j: usize) -> Result<f64, GridError> {
        Ok(self.values[self.grid.order(i, j)? - 1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ColonyError {
    /// Amplitude at or above the singular density 1.
    AmplitudeTooLarge(f64),
    NonPositiveRadius(f64),
}

impl fmt::Display for ColonyError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ColonyError::AmplitudeTooLarge(a) => {
                write!(f, "colony amplitude {a} must be below 1")
            }
            ColonyError::NonPositiveRadius(r) => write!(f, "colony radius {r} must be positive"),
        }
    }
}

/// A semi-spherical inoculation site: cells whose centers fall inside the
/// disc are set to `amplitude`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Colony {
    pub x: f64,
    pub y: f64,
    pub radius: f64,
    pub amplitude: f64,
}

impl Colony {
    pub const DEFAULT_AMPLITUDE: f64 = 0.9;

    pub fn new(x: f64, y: f64, radius: f64, amplitude: f64) -> Colony {
        Colony {
            x,
            y,
            radius,
            amplitude,
        }
    }
}

/// Builds the initial biomass field from a list of colonies. Overlapping
/// discs take the maximum amplitude.
pub fn initialize_colonies(grid: Grid, colonies: &[Colony]) -> Result<Field, ColonyError> {
    for c in colonies {
        if c.amplitude >= 1.0 {
            return Err(ColonyError::AmplitudeTooLarge(c.amplitude));
        }
        if !(c.radius > 0.0) {
            return Err(ColonyError::NonPositiveRadius(c.radius));
        }
    }
    let mut field = Field::zeros(grid);
    for i in 1..=grid.nx() {
        for j in 1..=grid.ny() {
            let (x, y) = grid.cell_center(i, j).expect("in range");
            let mut v = 0.0;
            for c in colonies {
                let r2 = (x - c.x) * (x - c.x) + (y - c.y) * (y - c.y);
                if r2 < c.radius * c.radius {
                    v = math::max(v, c.amplitude);
                }
            }
            field.values[grid.order(i, j).expect("in range") - 1] = v;
        }
    }
    Ok(field)
}
