//! Linear maps with adjoints and the conjugate-gradient solver used for
//! `(Id + C*C)⁻¹`.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_dim, usage, Error, Result};
use crate::hvector::dot;

/// Relative residual at which `(Id + C*C) u = rhs` is considered solved.
pub const GRAM_SOLVE_RTOL: f64 = 1e-12;

/// A bounded linear map `C: ℝ^{dim_in} → ℝ^{dim_out}` together with its adjoint.
pub trait LinearMap: Send + Sync + fmt::Debug {
    fn dim_in(&self) -> usize;
    fn dim_out(&self) -> usize;

    /// `out = C x`
    fn apply_into(&self, x: &[f64], out: &mut [f64]);

    /// `out = C* y`
    fn adjoint_into(&self, y: &[f64], out: &mut [f64]);

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim_out()];
        self.apply_into(x, &mut out);
        out
    }

    fn adjoint(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim_in()];
        self.adjoint_into(y, &mut out);
        out
    }

    /// Solves `(Id + C*C) u = rhs` by conjugate gradients.
    ///
    /// Stops at relative residual [`GRAM_SOLVE_RTOL`]; fails after
    /// `10 * dim_in` iterations.
    fn solve_identity_plus_gram(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim_in(), rhs.len())?;
        let mut tmp = vec![0.0; self.dim_out()];
        let sol = conjugate_gradient(
            |x, out| {
                self.apply_into(x, &mut tmp);
                self.adjoint_into(&tmp, out);
                for (o, xi) in out.iter_mut().zip(x) {
                    *o += xi;
                }
            },
            rhs,
            GRAM_SOLVE_RTOL * norm(rhs),
            10 * self.dim_in().max(1),
        )?;
        Ok(sol.x)
    }
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return usage("matrix dimensions must be positive");
        }
        check_dim(rows * cols, data.len())?;
        if data.iter().any(|x| !x.is_finite()) {
            return usage("matrix entries must be finite");
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn scalar(c: f64) -> Self {
        Self {
            rows: 1,
            cols: 1,
            data: vec![c],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn to_nalgebra(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    pub fn from_nalgebra(m: &nalgebra::DMatrix<f64>) -> Self {
        let (rows, cols) = m.shape();
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(m[(i, j)]);
            }
        }
        Self { rows, cols, data }
    }
}

impl LinearMap for DenseMatrix {
    fn dim_in(&self) -> usize {
        self.cols
    }

    fn dim_out(&self) -> usize {
        self.rows
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = dot(&self.data[i * self.cols..(i + 1) * self.cols], x);
        }
    }

    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (i, yi) in y.iter().enumerate() {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            for (o, a) in out.iter_mut().zip(row) {
                *o += a * yi;
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct CgSolution {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// Conjugate gradients for a symmetric positive definite operator given
/// matrix-free as `apply(x, out)`.
///
/// Starts from zero and stops when the residual norm is at most `atol`.
pub fn conjugate_gradient<F>(mut apply: F, rhs: &[f64], atol: f64, max_iter: usize) -> Result<CgSolution>
where
    F: FnMut(&[f64], &mut [f64]),
{
    let n = rhs.len();
    let mut x = vec![0.0; n];
    let mut r = rhs.to_vec();
    let mut rr = dot(&r, &r);
    if rr.sqrt() <= atol {
        return Ok(CgSolution {
            x,
            iterations: 0,
            residual: rr.sqrt(),
        });
    }
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    for it in 1..=max_iter {
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::NotConverged {
                what: "conjugate gradient (operator not positive definite)",
                iterations: it,
                residual: rr.sqrt(),
            });
        }
        let alpha = rr / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = dot(&r, &r);
        if rr_new.sqrt() <= atol {
            return Ok(CgSolution {
                x,
                iterations: it,
                residual: rr_new.sqrt(),
            });
        }
        let beta = rr_new / rr;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rr = rr_new;
    }
    Err(Error::NotConverged {
        what: "conjugate gradient",
        iterations: max_iter,
        residual: rr.sqrt(),
    })
}

/// Estimates `‖C‖` by power iteration on `C*C`.
///
/// The start vector is drawn from a fixed seed so the estimate is
/// reproducible. Power iteration approaches `‖C‖` from below.
pub fn operator_norm(c: &dyn LinearMap, max_iter: usize, tol: f64) -> f64 {
    let n = c.dim_in();
    let mut rng = ChaCha8Rng::seed_from_u64(0x6e6f726d);
    let mut x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut nx = norm(&x);
    if nx == 0.0 {
        return 0.0;
    }
    x.iter_mut().for_each(|v| *v /= nx);
    let mut cx = vec![0.0; c.dim_out()];
    let mut y = vec![0.0; n];
    let mut estimate = 0.0;
    for _ in 0..max_iter {
        c.apply_into(&x, &mut cx);
        c.adjoint_into(&cx, &mut y);
        let lambda = dot(&x, &y);
        nx = norm(&y);
        if nx == 0.0 {
            return 0.0;
        }
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi = yi / nx;
        }
        let done = (lambda - estimate).abs() <= tol * lambda.abs().max(1.0);
        estimate = lambda;
        if done {
            break;
        }
    }
    estimate.max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_adjoint_is_transpose() {
        let c = DenseMatrix::new(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(c.apply(&[1.0, 0.0, -1.0]), vec![-2.0, -2.0]);
        assert_eq!(c.adjoint(&[1.0, 1.0]), vec![5.0, 7.0, 9.0]);
    }

    #[test]
    fn gram_solve_scalar() {
        // (1 + 4) u = 5
        let c = DenseMatrix::scalar(2.0);
        let u = c.solve_identity_plus_gram(&[5.0]).unwrap();
        assert!((u[0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn cg_matches_dense_solve() {
        let c = DenseMatrix::new(3, 2, vec![1.0, -1.0, 0.5, 2.0, 0.0, 3.0]).unwrap();
        let rhs = [0.3, -1.7];
        let u = c.solve_identity_plus_gram(&rhs).unwrap();
        let cm = c.to_nalgebra();
        let a = nalgebra::DMatrix::identity(2, 2) + cm.transpose() * &cm;
        let exact = a.lu().solve(&nalgebra::DVector::from_column_slice(&rhs)).unwrap();
        for i in 0..2 {
            assert!((u[i] - exact[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn cg_reports_non_convergence() {
        let err = conjugate_gradient(|x, out| out.copy_from_slice(x), &[1.0, 2.0], 0.0, 0).unwrap_err();
        assert!(matches!(err, Error::NotConverged { .. }));
    }

    #[test]
    fn power_iteration_on_diagonal() {
        let c = DenseMatrix::new(2, 2, vec![3.0, 0.0, 0.0, -0.5]).unwrap();
        assert!((operator_norm(&c, 200, 1e-12) - 3.0).abs() < 1e-6);
        assert_eq!(operator_norm(&DenseMatrix::zeros(2, 2), 200, 1e-12), 0.0);
    }
}
