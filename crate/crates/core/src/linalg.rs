//! Dense linear operators and the small amount of vector arithmetic the
//! solvers share.

use std::fmt;
use std::ops::Range;

use ndarray::{s, Array1, Array2, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// A linear map `R^cols -> R^rows` with column-block access.
///
/// Only dense matrices are provided, but solvers talk to this trait so a
/// matrix-free operator can be dropped in later.
pub trait LinearOperator: Send + Sync + fmt::Debug {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    fn apply(&self, x: ArrayView1<f64>) -> Array1<f64>;
    fn apply_adjoint(&self, y: ArrayView1<f64>) -> Array1<f64>;

    /// `A_block * x_block`, where `A_block` is the column slice `block`.
    fn apply_block(&self, block: Range<usize>, x_block: ArrayView1<f64>) -> Array1<f64>;

    /// `A_block^T * y`.
    fn adjoint_block(&self, block: Range<usize>, y: ArrayView1<f64>) -> Array1<f64>;

    /// Dense copy of the operator, used for serialization.
    fn to_dense(&self) -> Array2<f64>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseOperator {
    matrix: Array2<f64>,
}

impl DenseOperator {
    pub fn new(matrix: Array2<f64>) -> Self {
        Self { matrix }
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    /// Column block `A_i` as its own operator.
    pub fn column_block(&self, block: Range<usize>) -> DenseOperator {
        DenseOperator::new(self.matrix.slice(s![.., block]).to_owned())
    }
}

impl LinearOperator for DenseOperator {
    fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    fn cols(&self) -> usize {
        self.matrix.ncols()
    }

    fn apply(&self, x: ArrayView1<f64>) -> Array1<f64> {
        self.matrix.dot(&x)
    }

    fn apply_adjoint(&self, y: ArrayView1<f64>) -> Array1<f64> {
        self.matrix.t().dot(&y)
    }

    fn apply_block(&self, block: Range<usize>, x_block: ArrayView1<f64>) -> Array1<f64> {
        self.matrix.slice(s![.., block]).dot(&x_block)
    }

    fn adjoint_block(&self, block: Range<usize>, y: ArrayView1<f64>) -> Array1<f64> {
        self.matrix.slice(s![.., block]).t().dot(&y)
    }

    fn to_dense(&self) -> Array2<f64> {
        self.matrix.clone()
    }
}

/// Default relative tolerance for [`operator_norm_sq`].
pub const NORM_TOL: f64 = 1e-8;

/// Largest eigenvalue of `A^T A` (the squared spectral norm) by power iteration.
///
/// Iterates until the Rayleigh quotient changes by at most `tol` relative,
/// capped at `10 * cols` iterations (never fewer than 1000).
pub fn operator_norm_sq(op: &dyn LinearOperator, tol: f64) -> Result<f64> {
    let n = op.cols();
    if n == 0 || op.rows() == 0 {
        return Ok(0.0);
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "power iteration tolerance {tol}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut v: Array1<f64> = (0..n).map(|_| rng.random_range(0.5..1.5)).collect();
    let nv = norm(v.view());
    v /= nv;

    let cap = (10 * n).max(1000);
    let mut estimate = 0.0;
    for it in 0..cap {
        let w = op.apply_adjoint(op.apply(v.view()).view());
        let next = v.dot(&w);
        if !next.is_finite() {
            return Err(Error::NonFinite("power iteration"));
        }
        let nw = norm(w.view());
        if nw == 0.0 {
            return Ok(0.0);
        }
        if it > 0 && (next - estimate).abs() <= tol * next.abs() {
            return Ok(next.max(estimate));
        }
        estimate = next;
        v = w / nw;
    }
    Err(Error::NoConvergence {
        iterations: cap,
        estimate,
    })
}

pub fn norm(v: ArrayView1<f64>) -> f64 {
    v.dot(&v).sqrt()
}

pub fn norm_sq(v: ArrayView1<f64>) -> f64 {
    v.dot(&v)
}

pub fn pos(a: f64) -> f64 {
    a.max(0.0)
}

pub fn all_finite(v: ArrayView1<f64>) -> bool {
    v.iter().all(|a| a.is_finite())
}

/// Symmetrized product `M^T M / scale` used to build PSD matrices.
pub fn gram(m: &Array2<f64>, scale: f64) -> Array2<f64> {
    let mut g = m.t().dot(m) / scale;
    // exact symmetry
    let n = g.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (g[[i, j]] + g[[j, i]]);
            g[[i, j]] = avg;
            g[[j, i]] = avg;
        }
    }
    g
}

/// Spectral norm of a symmetric matrix via [`operator_norm_sq`].
pub fn spectral_norm(m: &Array2<f64>) -> Result<f64> {
    let op = DenseOperator::new(m.clone());
    Ok(operator_norm_sq(&op, NORM_TOL)?.sqrt())
}
