//! Smooth convex functions: the objective `g` and the constraint functions `f_j`.

use std::fmt;
use std::ops::Range;
use std::sync::Arc;

use ndarray::{s, Array1, Array2, ArrayView1};

use crate::error::{check_dim, Result};
use crate::linalg::{norm, spectral_norm};
use crate::model::document::FunctionSpec;
use crate::model::prox::BoxDomain;

/// Relative inflation of power-iteration norm estimates.
pub(crate) const UPPER_BOUND_SLACK: f64 = 1e-8;

/// A convex, continuously differentiable function of a dense vector.
///
/// Besides the value and gradient oracles, implementors may maintain an
/// auxiliary linear image of the point (`Qx` for a quadratic, `Ax - b` for
/// a least-squares term). Block solvers keep that image current through
/// [`SmoothFunction::update_aux`] so a block change costs a fraction of a
/// full evaluation. The defaults keep no state and fall back to full
/// evaluation.
pub trait SmoothFunction: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    fn value(&self, x: ArrayView1<f64>) -> f64;
    fn gradient(&self, x: ArrayView1<f64>) -> Array1<f64>;

    /// Lipschitz constant of the gradient, when known.
    fn lipschitz(&self) -> Option<f64> {
        None
    }

    /// Upper bound on the gradient norm over `domain`, when finite.
    fn gradient_bound(&self, _domain: &BoxDomain) -> Option<f64> {
        None
    }

    fn partial_gradient(&self, x: ArrayView1<f64>, block: Range<usize>) -> Array1<f64> {
        self.gradient(x).slice(s![block]).to_owned()
    }

    fn aux(&self, _x: ArrayView1<f64>) -> Array1<f64> {
        Array1::zeros(0)
    }

    fn value_with(&self, x: ArrayView1<f64>, _aux: &Array1<f64>) -> f64 {
        self.value(x)
    }

    fn gradient_with(&self, x: ArrayView1<f64>, _aux: &Array1<f64>) -> Array1<f64> {
        self.gradient(x)
    }

    fn partial_gradient_with(
        &self,
        x: ArrayView1<f64>,
        _aux: &Array1<f64>,
        block: Range<usize>,
    ) -> Array1<f64> {
        self.partial_gradient(x, block)
    }

    /// Applies the change `delta` of block `block` to `aux`.
    fn update_aux(&self, _aux: &mut Array1<f64>, _block: Range<usize>, _delta: ArrayView1<f64>) {}

    /// Whether [`SmoothFunction::update_aux`] does real incremental work.
    fn is_incremental(&self) -> bool {
        false
    }

    /// Serializable description; `None` for closure-backed functions.
    fn describe(&self) -> Option<FunctionSpec> {
        None
    }
}

/// `g(x) = 0`.
#[derive(Debug, Clone)]
pub struct ZeroFunction {
    dim: usize,
}

impl ZeroFunction {
    pub fn new(dim: usize) -> Self {
        Self { dim }
    }
}

impl SmoothFunction for ZeroFunction {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, _x: ArrayView1<f64>) -> f64 {
        0.0
    }

    fn gradient(&self, _x: ArrayView1<f64>) -> Array1<f64> {
        Array1::zeros(self.dim)
    }

    fn lipschitz(&self) -> Option<f64> {
        Some(0.0)
    }

    fn gradient_bound(&self, _domain: &BoxDomain) -> Option<f64> {
        Some(0.0)
    }

    fn partial_gradient(&self, _x: ArrayView1<f64>, block: Range<usize>) -> Array1<f64> {
        Array1::zeros(block.len())
    }

    fn describe(&self) -> Option<FunctionSpec> {
        Some(FunctionSpec::Zero { dim: self.dim })
    }
}

/// `f(x) = c^T x + d`. The auxiliary state is the scalar `c^T x`.
#[derive(Debug, Clone)]
pub struct Linear {
    c: Array1<f64>,
    d: f64,
}

impl Linear {
    pub fn new(c: Array1<f64>, d: f64) -> Self {
        Self { c, d }
    }

    pub fn coefficients(&self) -> &Array1<f64> {
        &self.c
    }
}

impl SmoothFunction for Linear {
    fn dim(&self) -> usize {
        self.c.len()
    }

    fn value(&self, x: ArrayView1<f64>) -> f64 {
        self.c.dot(&x) + self.d
    }

    fn gradient(&self, _x: ArrayView1<f64>) -> Array1<f64> {
        self.c.clone()
    }

    fn lipschitz(&self) -> Option<f64> {
        Some(0.0)
    }

    fn gradient_bound(&self, _domain: &BoxDomain) -> Option<f64> {
        Some(norm(self.c.view()))
    }

    fn partial_gradient(&self, _x: ArrayView1<f64>, block: Range<usize>) -> Array1<f64> {
        self.c.slice(s![block]).to_owned()
    }

    fn aux(&self, x: ArrayView1<f64>) -> Array1<f64> {
        Array1::from_elem(1, self.c.dot(&x))
    }

    fn value_with(&self, _x: ArrayView1<f64>, aux: &Array1<f64>) -> f64 {
        aux[0] + self.d
    }

    fn update_aux(&self, aux: &mut Array1<f64>, block: Range<usize>, delta: ArrayView1<f64>) {
        aux[0] += self.c.slice(s![block]).dot(&delta);
    }

    fn is_incremental(&self) -> bool {
        true
    }

    fn describe(&self) -> Option<FunctionSpec> {
        Some(FunctionSpec::Linear {
            c: self.c.to_vec(),
            d: self.d,
        })
    }
}

/// `f(x) = 1/2 x^T Q x + c^T x + d` with symmetric `Q`. Maintains `Qx`.
#[derive(Debug, Clone)]
pub struct Quadratic {
    q: Array2<f64>,
    c: Array1<f64>,
    d: f64,
    q_norm: f64,
}

impl Quadratic {
    pub fn new(q: Array2<f64>, c: Array1<f64>, d: f64) -> Result<Self> {
        check_dim("quadratic: Q columns", q.nrows(), q.ncols())?;
        check_dim("quadratic: linear term", q.nrows(), c.len())?;
        let mut q_norm = spectral_norm(&q)?;
        if q.nrows() > 1 {
            q_norm *= 1.0 + UPPER_BOUND_SLACK;
        }
        Ok(Self { q, c, d, q_norm })
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.q
    }

    pub fn linear(&self) -> &Array1<f64> {
        &self.c
    }

    pub fn offset(&self) -> f64 {
        self.d
    }

    /// Spectral norm of `Q` (rounded up).
    pub fn q_norm(&self) -> f64 {
        self.q_norm
    }
}

impl SmoothFunction for Quadratic {
    fn dim(&self) -> usize {
        self.c.len()
    }

    fn value(&self, x: ArrayView1<f64>) -> f64 {
        let qx = self.q.dot(&x);
        self.value_with(x, &qx)
    }

    fn gradient(&self, x: ArrayView1<f64>) -> Array1<f64> {
        self.q.dot(&x) + &self.c
    }

    fn lipschitz(&self) -> Option<f64> {
        Some(self.q_norm)
    }

    fn gradient_bound(&self, domain: &BoxDomain) -> Option<f64> {
        if self.dim() == 1 {
            // gradient is affine in x: extreme at an endpoint
            let (l, u) = (domain.lower()[0], domain.upper()[0]);
            let q = self.q[[0, 0]];
            if q == 0.0 {
                return Some(self.c[0].abs());
            }
            let b = (q * l + self.c[0]).abs().max((q * u + self.c[0]).abs());
            return b.is_finite().then_some(b);
        }
        let r = domain.radius();
        r.is_finite().then(|| self.q_norm * r + norm(self.c.view()))
    }

    fn partial_gradient(&self, x: ArrayView1<f64>, block: Range<usize>) -> Array1<f64> {
        self.q.slice(s![block.clone(), ..]).dot(&x) + self.c.slice(s![block])
    }

    fn aux(&self, x: ArrayView1<f64>) -> Array1<f64> {
        self.q.dot(&x)
    }

    fn value_with(&self, x: ArrayView1<f64>, aux: &Array1<f64>) -> f64 {
        0.5 * x.dot(aux) + self.c.dot(&x) + self.d
    }

    fn gradient_with(&self, _x: ArrayView1<f64>, aux: &Array1<f64>) -> Array1<f64> {
        aux + &self.c
    }

    fn partial_gradient_with(
        &self,
        _x: ArrayView1<f64>,
        aux: &Array1<f64>,
        block: Range<usize>,
    ) -> Array1<f64> {
        &aux.slice(s![block.clone()]) + &self.c.slice(s![block])
    }

    fn update_aux(&self, aux: &mut Array1<f64>, block: Range<usize>, delta: ArrayView1<f64>) {
        ndarray::linalg::general_mat_vec_mul(1.0, &self.q.slice(s![.., block]), &delta, 1.0, aux);
    }

    fn is_incremental(&self) -> bool {
        true
    }

    fn describe(&self) -> Option<FunctionSpec> {
        Some(FunctionSpec::Quadratic {
            q: self.q.clone().into(),
            c: self.c.to_vec(),
            d: self.d,
        })
    }
}

/// `f(x) = ||Ax - b||^2 - offset`. Maintains the residual `Ax - b`.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    a: Array2<f64>,
    b: Array1<f64>,
    offset: f64,
    a_norm: f64,
}

impl LeastSquares {
    pub fn new(a: Array2<f64>, b: Array1<f64>, offset: f64) -> Result<Self> {
        check_dim("least squares: rhs", a.nrows(), b.len())?;
        let mut a_norm = spectral_norm(&a)?;
        if a.nrows() > 1 || a.ncols() > 1 {
            a_norm *= 1.0 + UPPER_BOUND_SLACK;
        }
        Ok(Self {
            a,
            b,
            offset,
            a_norm,
        })
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.a
    }

    pub fn rhs(&self) -> &Array1<f64> {
        &self.b
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }
}

impl SmoothFunction for LeastSquares {
    fn dim(&self) -> usize {
        self.a.ncols()
    }

    fn value(&self, x: ArrayView1<f64>) -> f64 {
        let r = self.aux(x);
        self.value_with(x, &r)
    }

    fn gradient(&self, x: ArrayView1<f64>) -> Array1<f64> {
        let r = self.aux(x);
        self.gradient_with(x, &r)
    }

    fn lipschitz(&self) -> Option<f64> {
        Some(2.0 * self.a_norm * self.a_norm)
    }

    fn gradient_bound(&self, domain: &BoxDomain) -> Option<f64> {
        if self.dim() == 1 {
            let ends = [domain.lower()[0], domain.upper()[0]];
            if ends.iter().any(|e| !e.is_finite()) {
                return None;
            }
            let b = ends
                .iter()
                .map(|&e| norm(self.gradient(ndarray::arr1(&[e]).view()).view()))
                .fold(0.0, f64::max);
            return Some(b);
        }
        let r = domain.radius();
        r.is_finite()
            .then(|| 2.0 * self.a_norm * (self.a_norm * r + norm(self.b.view())))
    }

    fn partial_gradient(&self, x: ArrayView1<f64>, block: Range<usize>) -> Array1<f64> {
        let r = self.aux(x);
        self.partial_gradient_with(x, &r, block)
    }

    fn aux(&self, x: ArrayView1<f64>) -> Array1<f64> {
        self.a.dot(&x) - &self.b
    }

    fn value_with(&self, _x: ArrayView1<f64>, aux: &Array1<f64>) -> f64 {
        aux.dot(aux) - self.offset
    }

    fn gradient_with(&self, _x: ArrayView1<f64>, aux: &Array1<f64>) -> Array1<f64> {
        self.a.t().dot(aux) * 2.0
    }

    fn partial_gradient_with(
        &self,
        _x: ArrayView1<f64>,
        aux: &Array1<f64>,
        block: Range<usize>,
    ) -> Array1<f64> {
        self.a.slice(s![.., block]).t().dot(aux) * 2.0
    }

    fn update_aux(&self, aux: &mut Array1<f64>, block: Range<usize>, delta: ArrayView1<f64>) {
        ndarray::linalg::general_mat_vec_mul(1.0, &self.a.slice(s![.., block]), &delta, 1.0, aux);
    }

    fn is_incremental(&self) -> bool {
        true
    }

    fn describe(&self) -> Option<FunctionSpec> {
        Some(FunctionSpec::LeastSquares {
            a: self.a.clone().into(),
            b: self.b.to_vec(),
            offset: self.offset,
        })
    }
}

/// `f(x, t) = inner(x) - t` over the stacked variable `(x, t)`.
#[derive(Debug, Clone)]
pub struct Epigraph {
    inner: Arc<dyn SmoothFunction>,
}

impl Epigraph {
    pub fn new(inner: Arc<dyn SmoothFunction>) -> Self {
        Self { inner }
    }

    pub fn inner(&self) -> &Arc<dyn SmoothFunction> {
        &self.inner
    }

    fn split(&self, block: &Range<usize>) -> (Range<usize>, bool) {
        let n = self.inner.dim();
        (block.start.min(n)..block.end.min(n), block.end > n)
    }
}

impl SmoothFunction for Epigraph {
    fn dim(&self) -> usize {
        self.inner.dim() + 1
    }

    fn value(&self, x: ArrayView1<f64>) -> f64 {
        let n = self.inner.dim();
        self.inner.value(x.slice(s![..n])) - x[n]
    }

    fn gradient(&self, x: ArrayView1<f64>) -> Array1<f64> {
        let n = self.inner.dim();
        let mut g = Array1::from_elem(n + 1, -1.0);
        g.slice_mut(s![..n])
            .assign(&self.inner.gradient(x.slice(s![..n])));
        g
    }

    fn lipschitz(&self) -> Option<f64> {
        self.inner.lipschitz()
    }

    fn gradient_bound(&self, domain: &BoxDomain) -> Option<f64> {
        let n = self.inner.dim();
        let sub = domain.restrict(0..n);
        self.inner
            .gradient_bound(&sub)
            .map(|b| (b * b + 1.0).sqrt())
    }

    fn aux(&self, x: ArrayView1<f64>) -> Array1<f64> {
        self.inner.aux(x.slice(s![..self.inner.dim()]))
    }

    fn value_with(&self, x: ArrayView1<f64>, aux: &Array1<f64>) -> f64 {
        let n = self.inner.dim();
        self.inner.value_with(x.slice(s![..n]), aux) - x[n]
    }

    fn gradient_with(&self, x: ArrayView1<f64>, aux: &Array1<f64>) -> Array1<f64> {
        let n = self.inner.dim();
        let mut g = Array1::from_elem(n + 1, -1.0);
        g.slice_mut(s![..n])
            .assign(&self.inner.gradient_with(x.slice(s![..n]), aux));
        g
    }

    fn partial_gradient_with(
        &self,
        x: ArrayView1<f64>,
        aux: &Array1<f64>,
        block: Range<usize>,
    ) -> Array1<f64> {
        let n = self.inner.dim();
        let (inner_block, has_t) = self.split(&block);
        let mut g = Array1::from_elem(block.len(), -1.0);
        if !inner_block.is_empty() {
            let part = self
                .inner
                .partial_gradient_with(x.slice(s![..n]), aux, inner_block.clone());
            g.slice_mut(s![..inner_block.len()]).assign(&part);
        }
        debug_assert_eq!(inner_block.len() + usize::from(has_t), block.len());
        g
    }

    fn partial_gradient(&self, x: ArrayView1<f64>, block: Range<usize>) -> Array1<f64> {
        let aux = self.aux(x);
        self.partial_gradient_with(x, &aux, block)
    }

    fn update_aux(&self, aux: &mut Array1<f64>, block: Range<usize>, delta: ArrayView1<f64>) {
        let (inner_block, _) = self.split(&block);
        if !inner_block.is_empty() {
            let len = inner_block.len();
            self.inner
                .update_aux(aux, inner_block, delta.slice(s![..len]));
        }
    }

    fn is_incremental(&self) -> bool {
        self.inner.is_incremental()
    }

    fn describe(&self) -> Option<FunctionSpec> {
        Some(FunctionSpec::Epigraph {
            inner: Box::new(self.inner.describe()?),
        })
    }
}

type ValueFn = dyn Fn(ArrayView1<f64>) -> f64 + Send + Sync;
type GradFn = dyn Fn(ArrayView1<f64>) -> Array1<f64> + Send + Sync;

/// A smooth function given by closures.
pub struct FnSmooth {
    dim: usize,
    value: Box<ValueFn>,
    gradient: Box<GradFn>,
    lipschitz: Option<f64>,
}

impl FnSmooth {
    pub fn new(
        dim: usize,
        value: impl Fn(ArrayView1<f64>) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(ArrayView1<f64>) -> Array1<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            dim,
            value: Box::new(value),
            gradient: Box::new(gradient),
            lipschitz: None,
        }
    }

    pub fn with_lipschitz(mut self, l: f64) -> Self {
        self.lipschitz = Some(l);
        self
    }
}

impl fmt::Debug for FnSmooth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnSmooth")
            .field("dim", &self.dim)
            .field("lipschitz", &self.lipschitz)
            .finish_non_exhaustive()
    }
}

impl SmoothFunction for FnSmooth {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: ArrayView1<f64>) -> f64 {
        (self.value)(x)
    }

    fn gradient(&self, x: ArrayView1<f64>) -> Array1<f64> {
        (self.gradient)(x)
    }

    fn lipschitz(&self) -> Option<f64> {
        self.lipschitz
    }
}

/// Worst relative error between the gradient oracle and central finite
/// differences of the value oracle at `x`.
///
/// Uses step `1e-6 * (1 + ||x||)`; the error of each component is measured
/// relative to `max(1, ||grad||)`.
pub fn finite_difference_error(f: &dyn SmoothFunction, x: ArrayView1<f64>) -> f64 {
    let h = 1e-6 * (1.0 + norm(x));
    let grad = f.gradient(x);
    let scale = norm(grad.view()).max(1.0);
    let mut worst: f64 = 0.0;
    let mut xp = x.to_owned();
    for i in 0..x.len() {
        let xi = xp[i];
        xp[i] = xi + h;
        let fp = f.value(xp.view());
        xp[i] = xi - h;
        let fm = f.value(xp.view());
        xp[i] = xi;
        let fd = (fp - fm) / (2.0 * h);
        worst = worst.max((fd - grad[i]).abs() / scale);
    }
    worst
}
