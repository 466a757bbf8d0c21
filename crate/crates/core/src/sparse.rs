//! Diagonal-storage sparse matrices for the five-point stencil (plus
//! species-coupling blocks) and a preconditioned BiCGSTAB solver.
//!
//! A [`StencilMatrix`] stores one dense vector per nonzero diagonal, keyed
//! by offset: entry `diag[off][row]` multiplies `x[row + off]`. Rows whose
//! offset falls outside the matrix are padded with zeros, so every diagonal
//! has the full length `n`.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::math;

#[derive(Debug, Clone, PartialEq)]
pub struct StencilMatrix {
    n: usize,
    diagonals: BTreeMap<isize, Vec<f64>>,
}

impl StencilMatrix {
    pub fn new(n: usize) -> StencilMatrix {
        StencilMatrix {
            n,
            diagonals: BTreeMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Mutable access to a diagonal, allocating it (zeroed) on first use.
    pub fn diagonal_mut(&mut self, offset: isize) -> &mut [f64] {
        debug_assert!(offset.unsigned_abs() < self.n.max(1));
        self.n_checked(offset);
        self.diagonals.entry(offset).or_insert_with(|| vec![0.0; self.n])
    }

    fn n_checked(&self, offset: isize) {
        assert!(
            offset.unsigned_abs() < self.n.max(1),
            "diagonal offset {offset} out of range for dim {}",
            self.n
        );
    }

    pub fn diagonal(&self, offset: isize) -> Option<&[f64]> {
        self.diagonals.get(&offset).map(|v| v.as_slice())
    }

    /// Add `v` to entry `(row, row + offset)`.
    pub fn add(&mut self, row: usize, offset: isize, v: f64) {
        self.diagonal_mut(offset)[row] += v;
    }

    pub fn entry(&self, row: usize, col: usize) -> f64 {
        let off = col as isize - row as isize;
        match self.diagonals.get(&off) {
            Some(d) => d[row],
            None => 0.0,
        }
    }

    /// Offsets of stored diagonals, ascending.
    pub fn offsets(&self) -> impl Iterator<Item = isize> + '_ {
        self.diagonals.keys().copied()
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        y.fill(0.0);
        for (&off, d) in &self.diagonals {
            if off >= 0 {
                let off = off as usize;
                for row in 0..self.n - off {
                    y[row] += d[row] * x[row + off];
                }
            } else {
                let off = (-off) as usize;
                for row in off..self.n {
                    y[row] += d[row] * x[row - off];
                }
            }
        }
    }

    /// Replace `A` by `a*I + s*A` (used to build `I - h*gamma*J`).
    pub fn shift_scale(&mut self, a: f64, s: f64) {
        for d in self.diagonals.values_mut() {
            for v in d.iter_mut() {
                *v *= s;
            }
        }
        let main = self.diagonal_mut(0);
        for v in main.iter_mut() {
            *v += a;
        }
    }

    /// Dense copy, for small-system tests.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.n]; self.n];
        for (row, out_row) in out.iter_mut().enumerate() {
            for (col, v) in out_row.iter_mut().enumerate() {
                *v = self.entry(row, col);
            }
        }
        out
    }
}

/// Outcome of a [`bicgstab`] solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
    /// Scalar breakdown (rho or omega vanished) before convergence.
    pub breakdown: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        s += a[i] * b[i];
    }
    s
}

fn norm2(a: &[f64]) -> f64 {
    math::sqrt(dot(a, a))
}

/// Preconditioned BiCGSTAB (van der Vorst). Solves `A x = b` in place,
/// starting from the provided `x`. Convergence criterion:
/// `||b - A x||_2 <= tol * max(||b||_2, 1e-300)`.
///
/// The Jacobi preconditioner divides by the main diagonal where it is
/// nonzero; it is exact for diagonal systems and cheap insurance for the
/// stiff diffusion blocks.
pub fn bicgstab(
    a: &StencilMatrix,
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> SolveReport {
    let n = a.dim();
    assert_eq!(b.len(), n);
    assert_eq!(x.len(), n);

    let inv_diag: Vec<f64> = match a.diagonal(0) {
        Some(d) => d
            .iter()
            .map(|&v| if v != 0.0 { 1.0 / v } else { 1.0 })
            .collect(),
        None => vec![1.0; n],
    };
    let precond = |src: &[f64], dst: &mut [f64]| {
        for i in 0..n {
            dst[i] = src[i] * inv_diag[i];
        }
    };

    let b_norm = math::max(norm2(b), 1e-300);
    let target = tol * b_norm;

    let mut r = vec![0.0; n];
    a.matvec(x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let mut res = norm2(&r);
    if res <= target {
        return SolveReport {
            iterations: 0,
            residual: res,
            converged: true,
            breakdown: false,
        };
    }

    let r0 = r.clone();
    let mut rho = 1.0;
    let mut alpha = 1.0;
    let mut omega = 1.0;
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut ph = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut sh = vec![0.0; n];
    let mut t = vec![0.0; n];

    for it in 1..=max_iter {
        let rho_new = dot(&r0, &r);
        if math::abs(rho_new) < 1e-300 {
            return SolveReport {
                iterations: it,
                residual: res,
                converged: false,
                breakdown: true,
            };
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        precond(&p, &mut ph);
        a.matvec(&ph, &mut v);
        let r0v = dot(&r0, &v);
        if math::abs(r0v) < 1e-300 {
            return SolveReport {
                iterations: it,
                residual: res,
                converged: false,
                breakdown: true,
            };
        }
        alpha = rho / r0v;
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        let s_norm = norm2(&s);
        if s_norm <= target {
            for i in 0..n {
                x[i] += alpha * ph[i];
            }
            return SolveReport {
                iterations: it,
                residual: s_norm,
                converged: true,
                breakdown: false,
            };
        }
        precond(&s, &mut sh);
        a.matvec(&sh, &mut t);
        let tt = dot(&t, &t);
        if tt < 1e-300 {
            return SolveReport {
                iterations: it,
                residual: s_norm,
                converged: false,
                breakdown: true,
            };
        }
        omega = dot(&t, &s) / tt;
        for i in 0..n {
            x[i] += alpha * ph[i] + omega * sh[i];
        }
        for i in 0..n {
            r[i] = s[i] - omega * t[i];
        }
        res = norm2(&r);
        if res <= target {
            return SolveReport {
                iterations: it,
                residual: res,
                converged: true,
                breakdown: false,
            };
        }
        if math::abs(omega) < 1e-300 {
            return SolveReport {
                iterations: it,
                residual: res,
                converged: false,
                breakdown: true,
            };
        }
    }

    SolveReport {
        iterations: max_iter,
        residual: res,
        converged: false,
        breakdown: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_1d(n: usize) -> StencilMatrix {
        let mut a = StencilMatrix::new(n);
        for row in 0..n {
            a.add(row, 0, 2.0);
            if row + 1 < n {
                a.add(row, 1, -1.0);
            }
            if row > 0 {
                a.add(row, -1, -1.0);
            }
        }
        a
    }

    #[test]
    fn matvec_matches_dense() {
        let a = laplacian_1d(7);
        let dense = a.to_dense();
        let x: Vec<f64> = (0..7).map(|i| (i as f64) * 0.3 - 1.0).collect();
        let mut y = vec![0.0; 7];
        a.matvec(&x, &mut y);
        for row in 0..7 {
            let mut s = 0.0;
            for col in 0..7 {
                s += dense[row][col] * x[col];
            }
            assert!((y[row] - s).abs() < 1e-14);
        }
    }

    #[test]
    fn identity_matvec() {
        let mut a = StencilMatrix::new(4);
        a.shift_scale(1.0, 0.0);
        let x = vec![3.0, -1.0, 0.5, 2.0];
        let mut y = vec![0.0; 4];
        a.matvec(&x, &mut y);
        assert_eq!(x, y);
    }

    #[test]
    fn shift_scale_builds_newton_matrix() {
        let mut a = laplacian_1d(5);
        a.shift_scale(1.0, -0.25);
        assert!((a.entry(2, 2) - (1.0 - 0.5)).abs() < 1e-15);
        assert!((a.entry(2, 3) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn entry_outside_stored_diagonals_is_zero() {
        let a = laplacian_1d(5);
        assert_eq!(a.entry(0, 4), 0.0);
        assert_eq!(a.entry(4, 0), 0.0);
    }

    #[test]
    fn bicgstab_solves_spd_system() {
        let n = 50;
        let a = laplacian_1d(n);
        let x_true: Vec<f64> = (0..n).map(|i| libm::sin(0.37 * i as f64)).collect();
        let mut b = vec![0.0; n];
        a.matvec(&x_true, &mut b);
        let mut x = vec![0.0; n];
        let rep = bicgstab(&a, &b, &mut x, 1e-12, 1000);
        assert!(rep.converged, "{rep:?}");
        for i in 0..n {
            assert!((x[i] - x_true[i]).abs() < 1e-8, "i={i}");
        }
    }

    #[test]
    fn bicgstab_solves_nonsymmetric_system() {
        let n = 40;
        let mut a = StencilMatrix::new(n);
        for row in 0..n {
            a.add(row, 0, 4.0);
            if row + 1 < n {
                a.add(row, 1, -1.5);
            }
            if row > 0 {
                a.add(row, -1, -0.5);
            }
            if row + 5 < n {
                a.add(row, 5, 0.3);
            }
        }
        let x_true: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * i as f64).collect();
        let mut b = vec![0.0; n];
        a.matvec(&x_true, &mut b);
        let mut x = vec![0.0; n];
        let rep = bicgstab(&a, &b, &mut x, 1e-12, 1000);
        assert!(rep.converged);
        for i in 0..n {
            assert!((x[i] - x_true[i]).abs() < 1e-7);
        }
    }

    #[test]
    fn bicgstab_zero_rhs_converges_immediately() {
        let a = laplacian_1d(10);
        let b = vec![0.0; 10];
        let mut x = vec![0.0; 10];
        let rep = bicgstab(&a, &b, &mut x, 1e-10, 100);
        assert!(rep.converged);
        assert_eq!(rep.iterations, 0);
    }

    #[test]
    fn bicgstab_is_deterministic() {
        let a = laplacian_1d(30);
        let b: Vec<f64> = (0..30).map(|i| libm::cos(i as f64)).collect();
        let mut x1 = vec![0.0; 30];
        let mut x2 = vec![0.0; 30];
        let r1 = bicgstab(&a, &b, &mut x1, 1e-11, 500);
        let r2 = bicgstab(&a, &b, &mut x2, 1e-11, 500);
        assert_eq!(x1, x2);
        assert_eq!(r1, r2);
    }

    #[test]
    fn bicgstab_reports_non_convergence() {
        let a = laplacian_1d(60);
        let b = vec![1.0; 60];
        let mut x = vec![0.0; 60];
        let rep = bicgstab(&a, &b, &mut x, 1e-14, 2);
        assert!(!rep.converged);
        assert!(rep.residual > 0.0);
    }
}
