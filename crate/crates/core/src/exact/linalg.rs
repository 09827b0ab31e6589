//! Linear solves behind the exact layer: dense LU with iterative refinement
//! up to [`DENSE_LIMIT`] unknowns, restarted GMRES with a Jacobi
//! preconditioner above it.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Largest system solved by dense factorization.
pub const DENSE_LIMIT: usize = 4096;

const REFINEMENT_STEPS: usize = 3;
const GMRES_RESTART: usize = 60;
const GMRES_MAX_RESTARTS: usize = 2000;
const GMRES_TOL: f64 = 1e-13;
/// Accepted backward error `||Mx - b|| / (||M|| ||x|| + ||b||)`.
const BACKWARD_TOL: f64 = 1e-11;

/// Square sparse matrix in compressed rows.
#[derive(Debug, Clone, Default)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    pub fn with_capacity(n: usize, nnz: usize) -> Self {
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        Self {
            n,
            row_ptr,
            cols: Vec::with_capacity(nnz),
            vals: Vec::with_capacity(nnz),
        }
    }

    /// Appends an entry to the row under construction.
    pub fn push(&mut self, j: usize, v: f64) {
        self.cols.push(j);
        self.vals.push(v);
    }

    pub fn finish_row(&mut self) {
        self.row_ptr.push(self.cols.len());
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.cols[a..b].iter().copied().zip(self.vals[a..b].iter().copied())
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()).collect()
    }

    pub fn norm_inf(&self) -> f64 {
        (0..self.n)
            .map(|i| self.row(i).map(|(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    fn diagonal(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).filter(|&(j, _)| j == i).map(|(_, v)| v).sum())
            .collect()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                m[(i, j)] += v;
            }
        }
        m
    }

    /// Backward error of `x` as a solution of `self x = b`.
    pub fn backward_error(&self, x: &[f64], b: &[f64]) -> f64 {
        let r = self.mul(x);
        let res = r.iter().zip(b).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let scale = self.norm_inf() * inf_norm(x) + inf_norm(b);
        if scale == 0.0 {
            res
        } else {
            res / scale
        }
    }
}

pub(crate) fn inf_norm(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Solves `m x = b`, dense or iterative by size.
pub fn solve(m: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>> {
    if b.len() != m.dim() {
        return Err(Error::Dimension(format!("right-hand side of length {} for {} unknowns", b.len(), m.dim())));
    }
    if m.dim() == 0 {
        return Ok(Vec::new());
    }
    let x = if m.dim() <= DENSE_LIMIT {
        solve_dense(m, b)?
    } else {
        gmres(m, b)?
    };
    let err = m.backward_error(&x, b);
    if !(err <= BACKWARD_TOL) {
        return Err(Error::numerical("linear solve did not reach tolerance", err));
    }
    Ok(x)
}

fn solve_dense(m: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let a = m.to_dense();
    let lu = a.clone().lu();
    let rhs = DVector::from_column_slice(b);
    let mut x = lu
        .solve(&rhs)
        .ok_or_else(|| Error::numerical("singular matrix in dense solve", f64::INFINITY))?;
    for _ in 0..REFINEMENT_STEPS {
        let r = &rhs - &a * &x;
        if r.amax() == 0.0 {
            break;
        }
        match lu.solve(&r) {
            Some(dx) => x += dx,
            None => break,
        }
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical("non-finite dense solution", f64::INFINITY));
    }
    Ok(x.as_slice().to_vec())
}

/// Restarted GMRES with left Jacobi scaling.
fn gmres(m: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = m.dim();
    let diag = m.diagonal();
    let inv: Vec<f64> = diag.iter().map(|&d| if d != 0.0 { 1.0 / d } else { 1.0 }).collect();
    let precond = |v: &[f64]| -> Vec<f64> { v.iter().zip(&inv).map(|(a, b)| a * b).collect() };
    let pb = precond(b);
    let bnorm = norm2(&pb);
    if bnorm == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let mut x = vec![0.0; n];
    let mut rel = f64::INFINITY;
    for _ in 0..GMRES_MAX_RESTARTS {
        let ax = m.mul(&x);
        let r0: Vec<f64> = precond(&b.iter().zip(&ax).map(|(b, a)| b - a).collect::<Vec<_>>());
        let beta = norm2(&r0);
        rel = beta / bnorm;
        if rel <= GMRES_TOL {
            return Ok(x);
        }
        let k_max = GMRES_RESTART.min(n);
        let mut v: Vec<Vec<f64>> = vec![r0.iter().map(|r| r / beta).collect()];
        let mut h = vec![vec![0.0; k_max]; k_max + 1];
        let (mut cs, mut sn) = (vec![0.0; k_max], vec![0.0; k_max]);
        let mut g = vec![0.0; k_max + 1];
        g[0] = beta;
        let mut k_used = 0;
        for k in 0..k_max {
            let mut w = precond(&m.mul(&v[k]));
            for (i, vi) in v.iter().enumerate() {
                let hik = dot(&w, vi);
                h[i][k] = hik;
                axpy(&mut w, -hik, vi);
            }
            let hn = norm2(&w);
            h[k + 1][k] = hn;
            for i in 0..k {
                let t = cs[i] * h[i][k] + sn[i] * h[i + 1][k];
                h[i + 1][k] = -sn[i] * h[i][k] + cs[i] * h[i + 1][k];
                h[i][k] = t;
            }
            let denom = h[k][k].hypot(h[k + 1][k]);
            cs[k] = h[k][k] / denom;
            sn[k] = h[k + 1][k] / denom;
            h[k][k] = denom;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            k_used = k + 1;
            rel = g[k + 1].abs() / bnorm;
            if rel <= GMRES_TOL || hn == 0.0 {
                break;
            }
            v.push(w.iter().map(|x| x / hn).collect());
        }
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let s: f64 = (i + 1..k_used).map(|j| h[i][j] * y[j]).sum();
            y[i] = (g[i] - s) / h[i][i];
        }
        for (yi, vi) in y.iter().zip(&v) {
            axpy(&mut x, *yi, vi);
        }
    }
    Err(Error::numerical("GMRES did not converge", rel))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (y, x) in y.iter_mut().zip(x) {
        *y += a * x;
    }
}

/// Thomas algorithm for `sub[i] x[i-1] + diag[i] x[i] + sup[i] x[i+1] = rhs[i]`.
pub fn solve_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    if sub.len() != n || sup.len() != n || rhs.len() != n {
        return Err(Error::Dimension("tridiagonal bands of unequal length".into()));
    }
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut prev_c = 0.0;
    let mut prev_d = 0.0;
    for i in 0..n {
        let denom = diag[i] - sub[i] * prev_c;
        if denom == 0.0 || !denom.is_finite() {
            return Err(Error::numerical("zero pivot in tridiagonal solve", f64::INFINITY));
        }
        c[i] = sup[i] / denom;
        d[i] = (rhs[i] - sub[i] * prev_d) / denom;
        prev_c = c[i];
        prev_d = d[i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        x[i] = d[i] - if i + 1 < n { c[i] * x[i + 1] } else { 0.0 };
    }
    Ok(x)
}
