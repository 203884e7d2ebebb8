//! Cached function data at a primal point, with cheap block updates.

use std::ops::Range;

use ndarray::{Array1, ArrayView1};

use crate::auglag::smooth_value_raw;
use crate::linalg::pos;
use crate::model::{PrimalDualPoint, ProblemInstance};

/// `g(x)`, `f_j(x)`, `r = Ax - b` and the auxiliary images the functions use
/// for incremental evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub g_val: f64,
    pub fvals: Array1<f64>,
    pub r: Array1<f64>,
    g_aux: Array1<f64>,
    f_aux: Vec<Array1<f64>>,
}

impl Evaluation {
    pub fn at(prob: &ProblemInstance, x: ArrayView1<f64>) -> Self {
        let g = prob.objective();
        let g_aux = g.aux(x);
        let g_val = g.value_with(x, &g_aux);
        let mut f_aux = Vec::with_capacity(prob.num_ineq());
        let mut fvals = Array1::zeros(prob.num_ineq());
        for (j, c) in prob.constraints().iter().enumerate() {
            let aux = c.func.aux(x);
            fvals[j] = c.func.value_with(x, &aux);
            f_aux.push(aux);
        }
        Self {
            g_val,
            fvals,
            r: prob.residual(x),
            g_aux,
            f_aux,
        }
    }

    /// Updates the cache after block `block` of `x` moved by `delta`;
    /// `x_new` is the full point after the move.
    pub fn apply_block(
        &mut self,
        prob: &ProblemInstance,
        x_new: ArrayView1<f64>,
        block: Range<usize>,
        delta: ArrayView1<f64>,
    ) {
        if let Some(a) = prob.affine() {
            self.r += &a.operator().apply_block(block.clone(), delta);
        }
        let g = prob.objective();
        g.update_aux(&mut self.g_aux, block.clone(), delta);
        self.g_val = g.value_with(x_new, &self.g_aux);
        for (j, c) in prob.constraints().iter().enumerate() {
            c.func.update_aux(&mut self.f_aux[j], block.clone(), delta);
            self.fvals[j] = c.func.value_with(x_new, &self.f_aux[j]);
        }
    }

    /// A copy of the cache moved to `x_new`.
    pub fn shifted(
        &self,
        prob: &ProblemInstance,
        x_new: ArrayView1<f64>,
        block: Range<usize>,
        delta: ArrayView1<f64>,
    ) -> Self {
        let mut out = self.clone();
        out.apply_block(prob, x_new, block, delta);
        out
    }

    /// `F(x, y, z)` from the cached values.
    pub fn smooth_value(&self, y: ArrayView1<f64>, z: ArrayView1<f64>, beta: f64) -> f64 {
        smooth_value_raw(self.g_val, y, self.r.view(), z, self.fvals.view(), beta)
    }

    /// `g(x) + sum_j z_j f_j(x)`.
    pub fn weighted_value(&self, z: ArrayView1<f64>) -> f64 {
        self.g_val + z.dot(&self.fvals)
    }

    /// `grad_x F(x, y, z)`.
    pub fn smooth_gradient(
        &self,
        prob: &ProblemInstance,
        x: ArrayView1<f64>,
        y: ArrayView1<f64>,
        z: ArrayView1<f64>,
        beta: f64,
    ) -> Array1<f64> {
        let weights = self.penalty_weights(z, beta);
        let dual = (prob.num_eq() > 0).then(|| &y + &(&self.r * beta));
        self.combine(prob, x, dual.as_ref().map(|d| d.view()), weights.view())
    }

    /// Block `block` of `grad_x F(x, y, z)`.
    pub fn smooth_partial(
        &self,
        prob: &ProblemInstance,
        x: ArrayView1<f64>,
        y: ArrayView1<f64>,
        z: ArrayView1<f64>,
        beta: f64,
        block: Range<usize>,
    ) -> Array1<f64> {
        let mut grad = prob
            .objective()
            .partial_gradient_with(x, &self.g_aux, block.clone());
        if let Some(a) = prob.affine() {
            let dual = &y + &(&self.r * beta);
            grad += &a.operator().adjoint_block(block.clone(), dual.view());
        }
        for (j, c) in prob.constraints().iter().enumerate() {
            let w = pos(beta * self.fvals[j] + z[j]);
            if w > 0.0 {
                grad.scaled_add(
                    w,
                    &c.func
                        .partial_gradient_with(x, &self.f_aux[j], block.clone()),
                );
            }
        }
        grad
    }

    /// `grad g(x) + A^T y + sum_j z_j grad f_j(x)`.
    pub fn lagrangian_gradient(
        &self,
        prob: &ProblemInstance,
        x: ArrayView1<f64>,
        y: ArrayView1<f64>,
        z: ArrayView1<f64>,
    ) -> Array1<f64> {
        self.combine(prob, x, (prob.num_eq() > 0).then_some(y), z)
    }

    /// Block `block` of the objective gradient alone.
    pub fn objective_partial(
        &self,
        prob: &ProblemInstance,
        x: ArrayView1<f64>,
        block: Range<usize>,
    ) -> Array1<f64> {
        prob.objective()
            .partial_gradient_with(x, &self.g_aux, block)
    }

    /// The full objective gradient.
    pub fn objective_gradient(&self, prob: &ProblemInstance, x: ArrayView1<f64>) -> Array1<f64> {
        prob.objective().gradient_with(x, &self.g_aux)
    }

    pub fn point(&self, x: &Array1<f64>, y: &Array1<f64>, z: &Array1<f64>) -> PrimalDualPoint {
        PrimalDualPoint {
            x: x.clone(),
            y: y.clone(),
            z: z.clone(),
            r: self.r.clone(),
            fvals: self.fvals.clone(),
        }
    }

    fn penalty_weights(&self, z: ArrayView1<f64>, beta: f64) -> Array1<f64> {
        self.fvals
            .iter()
            .zip(z.iter())
            .map(|(&f, &zj)| pos(beta * f + zj))
            .collect()
    }

    fn combine(
        &self,
        prob: &ProblemInstance,
        x: ArrayView1<f64>,
        dual: Option<ArrayView1<f64>>,
        weights: ArrayView1<f64>,
    ) -> Array1<f64> {
        let mut grad = prob.objective().gradient_with(x, &self.g_aux);
        if let Some(d) = dual {
            grad += &prob.adjoint(d);
        }
        for (j, c) in prob.constraints().iter().enumerate() {
            if weights[j] != 0.0 {
                grad.scaled_add(weights[j], &c.func.gradient_with(x, &self.f_aux[j]));
            }
        }
        grad
    }

    /// Whether the cache matches a fresh evaluation at `x` to `tol` relative.
    pub fn consistent_with(&self, prob: &ProblemInstance, x: ArrayView1<f64>, tol: f64) -> bool {
        let fresh = Self::at(prob, x);
        let close = |a: f64, b: f64| (a - b).abs() <= tol * (1.0 + b.abs());
        close(self.g_val, fresh.g_val)
            && self
                .fvals
                .iter()
                .zip(fresh.fvals.iter())
                .all(|(&a, &b)| close(a, b))
            && self
                .r
                .iter()
                .zip(fresh.r.iter())
                .all(|(&a, &b)| close(a, b))
    }
}
