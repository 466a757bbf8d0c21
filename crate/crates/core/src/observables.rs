//! Scalar observables extracted from simulation fields: error norms for
//! the validation and refinement studies, interface tracking, biomass
//! integrals, quorum-sensing event times, and a quadratic least-squares
//! fit for the domain-size sweeps.

use crate::grid::Field;
use crate::math;

#[derive(Debug, Clone, PartialEq)]
pub enum ObservableError {
    GridMismatch,
    /// The fine grid must be exactly twice the coarse grid in each
    /// direction.
    NotNested,
    /// Fewer than 3 points or rank-deficient design in the quadratic fit.
    DegenerateFit,
}

impl core::fmt::Display for ObservableError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            ObservableError::GridMismatch => write!(f, "fields live on different grids"),
            ObservableError::NotNested => write!(f, "fine grid does not double the coarse grid"),
            ObservableError::DegenerateFit => {
                write!(f, "quadratic fit needs >= 3 points with distinct abscissae")
            }
        }
    }
}

/// `||a - b||_2 / (N*M)`, the cell-count-scaled Euclidean distance used by
/// the validation error tables.
pub fn scaled_l2_error(a: &Field, b: &Field) -> Result<f64, ObservableError> {
    if a.grid() != b.grid() {
        return Err(ObservableError::GridMismatch);
    }
    let mut s = 0.0;
    for (x, y) in a.values().iter().zip(b.values()) {
        let d = x - y;
        s += d * d;
    }
    Ok(math::sqrt(s) / a.grid().num_cells() as f64)
}

/// Restrict a field on a doubled grid to the coarse grid by 2x2 cell
/// averaging.
pub fn restrict(fine: &Field, coarse_grid: crate::grid::Grid) -> Result<Field, ObservableError> {
    let fg = fine.grid();
    if fg.nx() != 2 * coarse_grid.nx() || fg.ny() != 2 * coarse_grid.ny() {
        return Err(ObservableError::NotNested);
    }
    let (n, m) = (coarse_grid.nx(), coarse_grid.ny());
    let fm = fg.ny();
    let mut out = Field::zeros(coarse_grid);
    let v = fine.values();
    {
        let o = out.values_mut();
        for i in 0..n {
            for j in 0..m {
                let (fi, fj) = (2 * i, 2 * j);
                let s = v[fi * fm + fj]
                    + v[fi * fm + fj + 1]
                    + v[(fi + 1) * fm + fj]
                    + v[(fi + 1) * fm + fj + 1];
                o[i * m + j] = s / 4.0;
            }
        }
    }
    Ok(out)
}

/// Grid-refinement error `E^kappa`: the fine solution on the `2^kappa`
/// grid is restricted to the `2^(kappa-1)` grid and compared there, with
/// the paper's divisor `2^(2(kappa-1))` (the coarse cell count for square
/// power-of-two grids).
pub fn refinement_error(fine: &Field, coarse: &Field) -> Result<f64, ObservableError> {
    let restricted = restrict(fine, *coarse.grid())?;
    let mut s = 0.0;
    for (x, y) in restricted.values().iter().zip(coarse.values()) {
        let d = x - y;
        s += d * d;
    }
    Ok(math::sqrt(s) / coarse.grid().num_cells() as f64)
}

/// Height of the biofilm/fluid interface on the grid column nearest
/// `x_line`: the top face of the highest cell with `u >= threshold`, or 0
/// if the column is empty.
pub fn interface_height(u: &Field, x_line: f64, threshold: f64) -> f64 {
    let g = u.grid();
    let dx = g.dx();
    // nearest column index (1-based)
    let mut i = math::floor(x_line / dx) as isize + 1;
    i = i.clamp(1, g.nx() as isize);
    let i = i as usize;
    let m = g.ny();
    for j in (1..=m).rev() {
        if u.values()[(i - 1) * m + (j - 1)] >= threshold {
            return j as f64 * dx;
        }
    }
    0.0
}

/// Total biomass `M(t) = dx^2 * sum(U)` (midpoint quadrature of the area
/// integral).
pub fn total_biomass(u: &Field) -> f64 {
    let dx = u.grid().dx();
    u.values().iter().sum::<f64>() * dx * dx
}

/// Quorum-sensing event times resolved at accepted-step granularity, with
/// the total biomass recorded at each crossing.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct QsEventTimes {
    /// First time the signal reaches the threshold anywhere.
    pub t1: Option<f64>,
    /// First time the mean signal over the biofilm region reaches the
    /// threshold (integral form).
    pub t2: Option<f64>,
    /// First time the signal maximum over the biofilm region reaches the
    /// threshold.
    pub t3: Option<f64>,
    /// First time the signal reaches the threshold everywhere.
    pub t4: Option<f64>,
    pub m1: Option<f64>,
    pub m2: Option<f64>,
    pub m3: Option<f64>,
    pub m4: Option<f64>,
}

impl QsEventTimes {
    pub fn all_detected(&self) -> bool {
        self.t1.is_some() && self.t2.is_some() && self.t3.is_some() && self.t4.is_some()
    }
}

/// Incremental event detector: feed `(t, U, S)` after every accepted step.
#[derive(Debug, Clone)]
pub struct QsEventDetector {
    /// Signal threshold (scaled to 1 in the model).
    pub signal_threshold: f64,
    /// Membership threshold for the biofilm region `Omega_2 = {U >= thr}`.
    pub biofilm_threshold: f64,
    events: QsEventTimes,
}

impl QsEventDetector {
    pub fn new(signal_threshold: f64, biofilm_threshold: f64) -> QsEventDetector {
        QsEventDetector {
            signal_threshold,
            biofilm_threshold,
            events: QsEventTimes::default(),
        }
    }

    pub fn events(&self) -> QsEventTimes {
        self.events
    }

    /// All four events found; observation can stop.
    pub fn complete(&self) -> bool {
        self.events.all_detected()
    }

    pub fn observe(&mut self, t: f64, u: &Field, s: &Field) {
        debug_assert_eq!(u.grid(), s.grid());
        let thr = self.signal_threshold;
        let mut s_max = f64::NEG_INFINITY;
        let mut s_min = f64::INFINITY;
        let mut region_sum = 0.0;
        let mut region_cells = 0usize;
        let mut region_max = f64::NEG_INFINITY;
        for (&uv, &sv) in u.values().iter().zip(s.values()) {
            s_max = math::max(s_max, sv);
            s_min = math::min(s_min, sv);
            if uv >= self.biofilm_threshold {
                region_sum += sv;
                region_cells += 1;
                region_max = math::max(region_max, sv);
            }
        }
        let mass = total_biomass(u);
        let ev = &mut self.events;
        if ev.t1.is_none() && s_max >= thr {
            ev.t1 = Some(t);
            ev.m1 = Some(mass);
        }
        if ev.t2.is_none() && region_cells > 0 && region_sum >= thr * region_cells as f64 {
            ev.t2 = Some(t);
            ev.m2 = Some(mass);
        }
        if ev.t3.is_none() && region_cells > 0 && region_max >= thr {
            ev.t3 = Some(t);
            ev.m3 = Some(mass);
        }
        if ev.t4.is_none() && s_min >= thr {
            ev.t4 = Some(t);
            ev.m4 = Some(mass);
        }
    }
}

/// Least-squares quadratic `a*x^2 + b*x + c` with RMS residual.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadFit {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub rms: f64,
}

impl QuadFit {
    pub fn eval(&self, x: f64) -> f64 {
        (self.a * x + self.b) * x + self.c
    }
}

/// Fit a quadratic through `(x, y)` points by normal equations.
pub fn quad_fit(points: &[(f64, f64)]) -> Result<QuadFit, ObservableError> {
    if points.len() < 3 {
        return Err(ObservableError::DegenerateFit);
    }
    // moments of the design matrix [x^2, x, 1]
    let mut m = [[0.0f64; 3]; 3];
    let mut r = [0.0f64; 3];
    for &(x, y) in points {
        let basis = [x * x, x, 1.0];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] += basis[i] * basis[j];
            }
            r[i] += basis[i] * y;
        }
    }
    // Gaussian elimination with partial pivoting on the 3x3 system
    for col in 0..3 {
        let mut piv = col;
        for row in col + 1..3 {
            if math::abs(m[row][col]) > math::abs(m[piv][col]) {
                piv = row;
            }
        }
        if math::abs(m[piv][col]) < 1e-12 * points.len() as f64 {
            return Err(ObservableError::DegenerateFit);
        }
        m.swap(col, piv);
        r.swap(col, piv);
        for row in col + 1..3 {
            let f = m[row][col] / m[col][col];
            for k in col..3 {
                m[row][k] -= f * m[col][k];
            }
            r[row] -= f * r[col];
        }
    }
    let mut coef = [0.0f64; 3];
    for row in (0..3).rev() {
        let mut acc = r[row];
        for k in row + 1..3 {
            acc -= m[row][k] * coef[k];
        }
        coef[row] = acc / m[row][row];
    }
    let fit = QuadFit {
        a: coef[0],
        b: coef[1],
        c: coef[2],
        rms: 0.0,
    };
    let mut ss = 0.0;
    for &(x, y) in points {
        let d = fit.eval(x) - y;
        ss += d * d;
    }
    Ok(QuadFit {
        rms: math::sqrt(ss / points.len() as f64),
        ..fit
    })
}

/// RMS residual of an existing quadratic against data points.
pub fn quad_rms(fit: &QuadFit, points: &[(f64, f64)]) -> f64 {
    let mut ss = 0.0;
    for &(x, y) in points {
        let d = fit.eval(x) - y;
        ss += d * d;
    }
    math::sqrt(ss / points.len().max(1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use alloc::vec;
    use alloc::vec::Vec;

    fn field_from(grid: Grid, f: impl Fn(usize, usize) -> f64) -> Field {
        let (n, m) = (grid.nx(), grid.ny());
        let mut values = vec![0.0; n * m];
        for i in 0..n {
            for j in 0..m {
                values[i * m + j] = f(i, j);
            }
        }
        Field::from_values(grid, values).unwrap()
    }

    #[test]
    fn scaled_l2_error_examples() {
        let g = Grid::square(4, 1.0).unwrap();
        let a = Field::constant(g, 0.7);
        assert_eq!(scaled_l2_error(&a, &a).unwrap(), 0.0);
        let b = Field::constant(g, 1.7);
        // difference of ones on 16 cells: sqrt(16)/16 = 1/4
        assert!((scaled_l2_error(&a, &b).unwrap() - 0.25).abs() < 1e-15);

        // direct summation oracle on a 4x4 pair
        let x = field_from(g, |i, j| 0.1 * i as f64 + 0.01 * j as f64);
        let y = field_from(g, |i, j| 0.02 * (i * j) as f64);
        let mut s = 0.0;
        for p in 0..16 {
            let d = x.values()[p] - y.values()[p];
            s += d * d;
        }
        assert!((scaled_l2_error(&x, &y).unwrap() - s.sqrt() / 16.0).abs() < 1e-15);

        let other = Field::constant(Grid::square(5, 1.0).unwrap(), 0.0);
        assert_eq!(
            scaled_l2_error(&a, &other),
            Err(ObservableError::GridMismatch)
        );
    }

    #[test]
    fn scaled_l2_error_is_a_metric() {
        let g = Grid::square(3, 1.0).unwrap();
        let f1 = field_from(g, |i, j| libm::sin((i * 3 + j) as f64));
        let f2 = field_from(g, |i, j| libm::cos((i + j) as f64));
        let f3 = field_from(g, |i, j| 0.3 * (i as f64) - 0.2 * (j as f64));
        let d12 = scaled_l2_error(&f1, &f2).unwrap();
        let d21 = scaled_l2_error(&f2, &f1).unwrap();
        let d13 = scaled_l2_error(&f1, &f3).unwrap();
        let d23 = scaled_l2_error(&f2, &f3).unwrap();
        assert_eq!(d12, d21);
        assert!(d12 > 0.0);
        assert!(d13 <= d12 + d23 + 1e-15);
    }

    #[test]
    fn restriction_averages_2x2_blocks() {
        let fine_grid = Grid::square(4, 1.0).unwrap();
        let coarse_grid = Grid::square(2, 1.0).unwrap();
        // checkerboard: restriction is the block mean 0.5
        let fine = field_from(fine_grid, |i, j| ((i + j) % 2) as f64);
        let r = restrict(&fine, coarse_grid).unwrap();
        for &v in r.values() {
            assert!((v - 0.5).abs() < 1e-15);
        }
        // hand-computed block
        let fine = field_from(fine_grid, |i, j| (i * 4 + j) as f64);
        let r = restrict(&fine, coarse_grid).unwrap();
        // block (0,0): cells (0,0),(0,1),(1,0),(1,1) -> (0+1+4+5)/4 = 2.5
        assert!((r.values()[0] - 2.5).abs() < 1e-15);
    }

    #[test]
    fn refinement_error_examples() {
        let fine_grid = Grid::square(8, 1.0).unwrap();
        let coarse_grid = Grid::square(4, 1.0).unwrap();
        let fine = Field::constant(fine_grid, 0.3);
        let coarse = Field::constant(coarse_grid, 0.3);
        assert_eq!(refinement_error(&fine, &coarse).unwrap(), 0.0);

        // one coarse cell off by d: error = d / 16
        let mut coarse2 = coarse.clone();
        coarse2.values_mut()[5] += 0.4;
        let e = refinement_error(&fine, &coarse2).unwrap();
        assert!((e - 0.4 / 16.0).abs() < 1e-15);

        let bad = Field::constant(Grid::square(3, 1.0).unwrap(), 0.0);
        assert_eq!(
            refinement_error(&fine, &bad),
            Err(ObservableError::NotNested)
        );
    }

    #[test]
    fn interface_height_examples() {
        let g = Grid::square(8, 1.0).unwrap();
        let zero = Field::zeros(g);
        assert_eq!(interface_height(&zero, 0.5, 1e-3), 0.0);

        // bottom row only
        let bottom = field_from(g, |_, j| if j == 0 { 0.5 } else { 0.0 });
        let h = interface_height(&bottom, 0.5, 1e-3);
        assert!((h - g.dx()).abs() < 1e-15);

        // below threshold counts as empty
        let faint = Field::constant(g, 1e-6);
        assert_eq!(interface_height(&faint, 0.3, 1e-3), 0.0);

        // column selection: off-center line picks the nearest column
        let stripe = field_from(g, |i, j| if i == 2 && j < 4 { 1.0 } else { 0.0 });
        let h = interface_height(&stripe, 0.3, 1e-3);
        assert!((h - 0.5).abs() < 1e-15);
        assert_eq!(interface_height(&stripe, 0.9, 1e-3), 0.0);
    }

    #[test]
    fn interface_height_matches_barenblatt_support() {
        use crate::model::PmeParams;
        use crate::problems::{barenblatt_exact, barenblatt_support_radius};
        let g = Grid::square(64, 1.0).unwrap();
        let p = PmeParams::default();
        let f = field_from(g, |i, j| {
            let (x, y) = g.cell_center(i + 1, j + 1).unwrap();
            barenblatt_exact(x, y, p.t0, &p, g)
        });
        // column through the center: interface sits at 0.5 + support radius
        let h = interface_height(&f, 0.5, 1e-12);
        let expected = 0.5 + barenblatt_support_radius(p.t0, &p);
        assert!((h - expected).abs() <= g.dx(), "h={h} expected={expected}");
    }

    #[test]
    fn total_biomass_examples() {
        let g = Grid::square(10, 1.0).unwrap();
        assert_eq!(total_biomass(&Field::zeros(g)), 0.0);
        assert!((total_biomass(&Field::constant(g, 1.0)) - 1.0).abs() < 1e-14);
        let single = field_from(g, |i, j| if i == 3 && j == 7 { 2.5 } else { 0.0 });
        assert!((total_biomass(&single) - 2.5 * 0.01).abs() < 1e-16);
    }

    #[test]
    fn qs_events_never_crossed() {
        let g = Grid::square(4, 1.0).unwrap();
        let mut det = QsEventDetector::new(1.0, 1e-3);
        let u = Field::constant(g, 0.5);
        let s = Field::zeros(g);
        for step in 0..10 {
            det.observe(step as f64, &u, &s);
        }
        let ev = det.events();
        assert_eq!(ev, QsEventTimes::default());
        assert!(!det.complete());
    }

    #[test]
    fn qs_events_simultaneous_jump() {
        let g = Grid::square(4, 1.0).unwrap();
        let mut det = QsEventDetector::new(1.0, 1e-3);
        let u = Field::constant(g, 0.5);
        for step in 0..10 {
            let s = Field::constant(g, if step >= 5 { 2.0 } else { 0.1 });
            det.observe(step as f64, &u, &s);
        }
        let ev = det.events();
        assert_eq!(ev.t1, Some(5.0));
        assert_eq!(ev.t2, Some(5.0));
        assert_eq!(ev.t3, Some(5.0));
        assert_eq!(ev.t4, Some(5.0));
        assert!(det.complete());
        // u = 0.5 everywhere on the unit square: mass 0.5
        assert!((ev.m1.unwrap() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn qs_events_ramp_orders_t1_t3_t4() {
        let g = Grid::square(4, 1.0).unwrap();
        let mut det = QsEventDetector::new(1.0, 1e-3);
        // colony occupies the i < 2 half; signal peaks there and ramps in t
        let u = field_from(g, |i, _| if i < 2 { 0.8 } else { 0.0 });
        for step in 0..=20 {
            let t = step as f64 * 0.1;
            let s = field_from(g, |i, _| {
                let spatial = if i < 2 { 1.0 } else { 0.6 };
                t * spatial
            });
            det.observe(t, &u, &s);
        }
        let ev = det.events();
        // peak inside colony: crossing at t=1.0 exactly (1.0 * 1.0 >= 1)
        assert!((ev.t1.unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(ev.t1, ev.t3);
        assert_eq!(ev.t1, ev.t2); // uniform signal inside the colony
        // outside cells reach 1 at t = 1/0.6 -> first sample 1.7
        assert!((ev.t4.unwrap() - 1.7).abs() < 1e-12);
        assert!(ev.t1.unwrap() <= ev.t4.unwrap());
        assert!(ev.t3.unwrap() <= ev.t4.unwrap());
    }

    #[test]
    fn quad_fit_exact_families() {
        let pts: Vec<(f64, f64)> = [0.0, 1.0, 2.0, 3.5, -1.2]
            .iter()
            .map(|&x| (x, x * x))
            .collect();
        let f = quad_fit(&pts).unwrap();
        assert!((f.a - 1.0).abs() < 1e-10);
        assert!(f.b.abs() < 1e-10);
        assert!(f.c.abs() < 1e-10);
        assert!(f.rms < 1e-10);

        let pts: Vec<(f64, f64)> = [0.0, 0.5, 1.0, 2.0]
            .iter()
            .map(|&x| (x, 2.0 * x + 3.0))
            .collect();
        let f = quad_fit(&pts).unwrap();
        assert!(f.a.abs() < 1e-10);
        assert!((f.b - 2.0).abs() < 1e-10);
        assert!((f.c - 3.0).abs() < 1e-10);
    }

    #[test]
    fn quad_fit_rejects_degenerate_input() {
        assert!(quad_fit(&[(0.0, 1.0), (1.0, 2.0)]).is_err());
        // duplicated abscissa collapses the rank
        assert!(quad_fit(&[(1.0, 1.0), (1.0, 2.0), (1.0, 3.0)]).is_err());
    }

    #[test]
    fn quad_fit_recovers_reference_curve_from_sampled_points() {
        let reference = QuadFit {
            a: -0.331332,
            b: 2.04645,
            c: 7.98685,
            rms: 0.0,
        };
        let pts: Vec<(f64, f64)> = [1.0, 1.5, 2.0, 2.5]
            .iter()
            .map(|&l| (l, reference.eval(l)))
            .collect();
        let f = quad_fit(&pts).unwrap();
        assert!((f.a - reference.a).abs() < 1e-8);
        assert!((f.b - reference.b).abs() < 1e-8);
        assert!((f.c - reference.c).abs() < 1e-8);
        assert!(f.rms < 1e-9);
        assert!(quad_rms(&reference, &pts) < 1e-12);
    }
}
