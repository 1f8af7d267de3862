//! Sparse matrices and the linear solvers used by the flow and chemistry steps.

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};

use crate::error::{Error, Result};

/// Compressed sparse row matrix assembled from (row, col, value) triplets;
/// duplicate entries are summed.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

#[derive(Debug, Default, Clone)]
pub struct TripletBuilder {
    n: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    pub fn new(n: usize) -> Self {
        TripletBuilder { n, entries: Vec::new() }
    }

    pub fn with_capacity(n: usize, cap: usize) -> Self {
        TripletBuilder { n, entries: Vec::with_capacity(cap) }
    }

    #[inline]
    pub fn add(&mut self, row: usize, col: usize, val: f64) {
        debug_assert!(row < self.n && col < self.n);
        self.entries.push((row, col, val));
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn build(mut self) -> CsrMatrix {
        self.entries.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; self.n + 1];
        let mut cols = Vec::with_capacity(self.entries.len());
        let mut vals: Vec<f64> = Vec::with_capacity(self.entries.len());
        let mut last: Option<(usize, usize)> = None;
        for &(r, c, v) in &self.entries {
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..self.n {
            row_ptr[i + 1] += row_ptr[i];
        }
        CsrMatrix { n: self.n, row_ptr, cols, vals }
    }
}

impl CsrMatrix {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.cols[a..b].iter().copied().zip(self.vals[a..b].iter().copied())
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).find(|&(c, _)| c == i).map_or(0.0, |(_, v)| v)).collect()
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.vals[k] * x[self.cols[k]];
            }
            *yi = s;
        }
    }

    pub fn residual(&self, x: &[f64], b: &[f64]) -> Vec<f64> {
        let mut r = vec![0.0; self.n];
        self.matvec(x, &mut r);
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri = bi - *ri;
        }
        r
    }

    /// `(row, col, value)` lines, one per stored entry.
    pub fn to_triplet_text(&self) -> String {
        let mut s = String::new();
        for i in 0..self.n {
            for (c, v) in self.row(i) {
                s.push_str(&format!("{i} {c} {}\n", crate::io::format_number(v)));
            }
        }
        s
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        let scale = self.vals.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        for i in 0..self.n {
            for (c, v) in self.row(i) {
                let t = self.row(c).find(|&(cc, _)| cc == i).map_or(0.0, |(_, v)| v);
                if (v - t).abs() > tol * scale {
                    return false;
                }
            }
        }
        true
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    /// `|b - A x| / |b|`, or the absolute residual when `b = 0`.
    pub residual: f64,
    pub history: Vec<f64>,
}

/// Preconditioned conjugate gradients for a symmetric positive definite `a`.
/// `x` holds the initial guess and receives the solution.
pub fn pcg(
    a: &CsrMatrix,
    b: &[f64],
    x: &mut [f64],
    precond: impl Fn(&[f64], &mut [f64]),
    tol: f64,
    max_iter: usize,
) -> Result<SolveStats> {
    let n = a.dim();
    let bnorm = norm(b);
    let scale = if bnorm > 0.0 { bnorm } else { 1.0 };
    let mut r = a.residual(x, b);
    let mut history = vec![norm(&r) / scale];
    if history[0] <= tol || bnorm == 0.0 && history[0] == 0.0 {
        return Ok(SolveStats { iterations: 0, residual: history[0], history });
    }
    let mut z = vec![0.0; n];
    precond(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 1..=max_iter {
        a.matvec(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::SolverStagnation { iterations: it, residual: *history.last().unwrap(), history });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let res = norm(&r) / scale;
        history.push(res);
        if !res.is_finite() {
            return Err(Error::SolverStagnation { iterations: it, residual: res, history });
        }
        if res <= tol {
            // recompute to guard against drift of the recursive residual
            let true_res = norm(&a.residual(x, b)) / scale;
            if true_res <= tol {
                return Ok(SolveStats { iterations: it, residual: true_res, history });
            }
            r = a.residual(x, b);
        }
        precond(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let residual = *history.last().unwrap();
    Err(Error::SolverStagnation { iterations: max_iter, residual, history })
}

/// Jacobi-preconditioned CG.
pub fn jacobi_pcg(a: &CsrMatrix, b: &[f64], x: &mut [f64], tol: f64, max_iter: usize) -> Result<SolveStats> {
    let inv: Vec<f64> = a.diagonal().iter().map(|&d| if d != 0.0 { 1.0 / d } else { 1.0 }).collect();
    pcg(a, b, x, |r, z| z.iter_mut().zip(r).zip(&inv).for_each(|((zi, ri), di)| *zi = ri * di), tol, max_iter)
}

/// Sparse Cholesky factor of an SPD matrix.
pub struct Cholesky {
    llt: faer::sparse::linalg::solvers::Llt<usize, f64>,
    n: usize,
}

impl Cholesky {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let n = a.dim();
        let mut trips = Vec::with_capacity(a.nnz() / 2 + n);
        for i in 0..n {
            for (c, v) in a.row(i) {
                // lower triangle in column-major terms: row >= col
                if c <= i {
                    trips.push(Triplet::new(i, c, v));
                }
            }
        }
        let m = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &trips)
            .map_err(|e| Error::Factorization(format!("{e:?}")))?;
        let llt = m.sp_cholesky(Side::Lower).map_err(|e| Error::Factorization(format!("{e:?}")))?;
        Ok(Cholesky { llt, n })
    }

    pub fn solve(&self, b: &[f64], x: &mut [f64]) {
        let mut rhs = Mat::<f64>::from_fn(self.n, 1, |i, _| b[i]);
        self.llt.solve_in_place(rhs.as_mut());
        for (i, xi) in x.iter_mut().enumerate() {
            *xi = rhs[(i, 0)];
        }
    }
}

/// Solve an SPD system by CG preconditioned with its own Cholesky factor;
/// converges in a handful of iterations and certifies the residual.
pub fn direct_pcg(a: &CsrMatrix, b: &[f64], x: &mut [f64], tol: f64) -> Result<SolveStats> {
    let chol = Cholesky::factor(a)?;
    let mut first = vec![0.0; b.len()];
    chol.solve(b, &mut first);
    if first.iter().all(|v| v.is_finite()) {
        x.copy_from_slice(&first);
    }
    pcg(a, b, x, |r, z| chol.solve(r, z), tol, 50)
}

/// Solve a tridiagonal system `a_i x_{i-1} + b_i x_i + c_i x_{i+1} = d_i` (Thomas algorithm).
pub fn thomas(a: &[f64], b: &[f64], c: &[f64], d: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut cp = vec![0.0; n];
    let mut dp = vec![0.0; n];
    cp[0] = c[0] / b[0];
    dp[0] = d[0] / b[0];
    for i in 1..n {
        let m = b[i] - a[i] * cp[i - 1];
        cp[i] = if i + 1 < n { c[i] / m } else { 0.0 };
        dp[i] = (d[i] - a[i] * dp[i - 1]) / m;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = dp[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = dp[i] - cp[i] * x[i + 1];
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplace_1d(n: usize) -> CsrMatrix {
        let mut t = TripletBuilder::new(n);
        for i in 0..n {
            t.add(i, i, 2.0);
            if i > 0 {
                t.add(i, i - 1, -1.0);
            }
            if i + 1 < n {
                t.add(i, i + 1, -1.0);
            }
        }
        t.build()
    }

    #[test]
    fn duplicates_are_summed() {
        let mut t = TripletBuilder::new(2);
        t.add(0, 0, 1.0);
        t.add(0, 0, 2.0);
        t.add(1, 1, 4.0);
        let m = t.build();
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.diagonal(), vec![3.0, 4.0]);
    }

    #[test]
    fn cg_and_cholesky_agree() {
        let n = 50;
        let a = laplace_1d(n);
        let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin()).collect();
        let mut x1 = vec![0.0; n];
        let s = jacobi_pcg(&a, &b, &mut x1, 1e-12, 1000).unwrap();
        assert!(s.residual <= 1e-12);
        let mut x2 = vec![0.0; n];
        let s2 = direct_pcg(&a, &b, &mut x2, 1e-12).unwrap();
        assert!(s2.iterations <= 2);
        for i in 0..n {
            assert!((x1[i] - x2[i]).abs() < 1e-9);
        }
        // Thomas on the same system
        let lo = vec![-1.0; n];
        let di = vec![2.0; n];
        let x3 = thomas(&lo, &di, &lo, &b);
        for i in 0..n {
            assert!((x3[i] - x2[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let a = laplace_1d(10);
        let mut x = vec![0.0; 10];
        let s = jacobi_pcg(&a, &[0.0; 10], &mut x, 1e-12, 10).unwrap();
        assert_eq!(s.iterations, 0);
        assert!(x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn indefinite_matrix_reports_stagnation() {
        let mut t = TripletBuilder::new(2);
        t.add(0, 0, 1.0);
        t.add(1, 1, -1.0);
        let a = t.build();
        let mut x = vec![0.0; 2];
        assert!(matches!(jacobi_pcg(&a, &[1.0, 1.0], &mut x, 1e-12, 10), Err(Error::SolverStagnation { .. })));
        assert!(Cholesky::factor(&a).is_err());
    }
}
