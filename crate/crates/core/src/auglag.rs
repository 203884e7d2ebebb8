//! The classic augmented Lagrangian
//!
//! `L(x, y, z) = g(x) + h(x) + y^T (Ax - b) + beta/2 ||Ax - b||^2 + sum_j psi(f_j(x), z_j)`
//!
//! and its smooth part `F = L - h`, with gradients and the point-dependent
//! Lipschitz estimate used for analytic step sizes.

use std::ops::Range;

use ndarray::{Array1, ArrayView1};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{norm_sq, pos};
use crate::model::{PrimalDualPoint, ProblemInstance};

/// Validated penalty parameter `beta > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Penalty(f64);

impl Penalty {
    pub fn new(beta: f64) -> Result<Self> {
        if beta > 0.0 && beta.is_finite() {
            Ok(Self(beta))
        } else {
            Err(Error::InvalidParameter(format!(
                "penalty beta = {beta} must be positive"
            )))
        }
    }

    pub fn beta(self) -> f64 {
        self.0
    }
}

/// `psi(u, v) = u v + beta/2 u^2` if `beta u + v >= 0`, else `-v^2 / (2 beta)`.
pub fn psi(u: f64, v: f64, beta: f64) -> Result<f64> {
    Ok(psi_raw(u, v, Penalty::new(beta)?.beta()))
}

/// `d/du psi(u, v) = [beta u + v]_+`.
pub fn psi_du(u: f64, v: f64, beta: f64) -> Result<f64> {
    Ok(pos(Penalty::new(beta)?.beta() * u + v))
}

#[inline]
pub(crate) fn psi_raw(u: f64, v: f64, beta: f64) -> f64 {
    if beta * u + v >= 0.0 {
        u * v + 0.5 * beta * u * u
    } else {
        -v * v / (2.0 * beta)
    }
}

pub(crate) fn penalty_raw(fvals: ArrayView1<f64>, z: ArrayView1<f64>, beta: f64) -> f64 {
    fvals
        .iter()
        .zip(z.iter())
        .map(|(&f, &zj)| psi_raw(f, zj, beta))
        .sum()
}

/// `Psi(x, z) = sum_j psi(f_j(x), z_j)`.
pub fn penalty(
    x: ArrayView1<f64>,
    z: ArrayView1<f64>,
    beta: f64,
    prob: &ProblemInstance,
) -> Result<f64> {
    let beta = Penalty::new(beta)?.beta();
    check_dim("penalty point", prob.dim(), x.len())?;
    check_dim("penalty multipliers", prob.num_ineq(), z.len())?;
    Ok(penalty_raw(prob.constraint_values(x).view(), z, beta))
}

/// Value of the augmented Lagrangian at `w` (cached `r`, `fvals`).
/// Returns `+inf` when `x` is outside `dom(h)`.
pub fn augmented_lagrangian(w: &PrimalDualPoint, beta: f64, prob: &ProblemInstance) -> Result<f64> {
    let f = smooth_value(w, beta, prob)?;
    Ok(f + prob.regularizer().value(w.x.view()))
}

/// `F(w) = L(w) - h(x)`.
pub fn smooth_value(w: &PrimalDualPoint, beta: f64, prob: &ProblemInstance) -> Result<f64> {
    let beta = Penalty::new(beta)?.beta();
    check_point(w, prob)?;
    Ok(smooth_value_raw(
        prob.objective().value(w.x.view()),
        w.y.view(),
        w.r.view(),
        w.z.view(),
        w.fvals.view(),
        beta,
    ))
}

pub(crate) fn smooth_value_raw(
    g_val: f64,
    y: ArrayView1<f64>,
    r: ArrayView1<f64>,
    z: ArrayView1<f64>,
    fvals: ArrayView1<f64>,
    beta: f64,
) -> f64 {
    g_val + y.dot(&r) + 0.5 * beta * norm_sq(r) + penalty_raw(fvals, z, beta)
}

/// `grad_x F(w) = grad g + A^T (y + beta r) + sum_j [beta f_j + z_j]_+ grad f_j`.
pub fn smooth_gradient(
    w: &PrimalDualPoint,
    beta: f64,
    prob: &ProblemInstance,
) -> Result<Array1<f64>> {
    let beta = Penalty::new(beta)?.beta();
    check_point(w, prob)?;
    let mut grad = prob.objective().gradient(w.x.view());
    if prob.num_eq() > 0 {
        let dual = &w.y + &(&w.r * beta);
        grad += &prob.adjoint(dual.view());
    }
    for (j, c) in prob.constraints().iter().enumerate() {
        let weight = pos(beta * w.fvals[j] + w.z[j]);
        if weight > 0.0 {
            grad.scaled_add(weight, &c.func.gradient(w.x.view()));
        }
    }
    Ok(grad)
}

/// Block `i` of [`smooth_gradient`] under the problem's partition.
pub fn partial_gradient_block(
    w: &PrimalDualPoint,
    beta: f64,
    prob: &ProblemInstance,
    i: usize,
) -> Result<Array1<f64>> {
    let beta = Penalty::new(beta)?.beta();
    check_point(w, prob)?;
    let partition = prob.partition().ok_or(Error::MissingPartition)?;
    if i >= partition.len() {
        return Err(Error::InvalidParameter(format!(
            "block index {i} out of range for {} blocks",
            partition.len()
        )));
    }
    Ok(partial_gradient_range(w, beta, prob, partition.block(i)))
}

fn partial_gradient_range(
    w: &PrimalDualPoint,
    beta: f64,
    prob: &ProblemInstance,
    block: Range<usize>,
) -> Array1<f64> {
    let mut grad = prob.objective().partial_gradient(w.x.view(), block.clone());
    if let Some(a) = prob.affine() {
        let dual = &w.y + &(&w.r * beta);
        grad += &a.operator().adjoint_block(block.clone(), dual.view());
    }
    for (j, c) in prob.constraints().iter().enumerate() {
        let weight = pos(beta * w.fvals[j] + w.z[j]);
        if weight > 0.0 {
            grad.scaled_add(weight, &c.func.partial_gradient(w.x.view(), block.clone()));
        }
    }
    grad
}

/// `L_Psi(x, z) = sum_j (beta B_j^2 + L_j [beta f_j(x) + z_j]_+)`.
pub fn penalty_lipschitz(
    x: ArrayView1<f64>,
    z: ArrayView1<f64>,
    beta: f64,
    prob: &ProblemInstance,
) -> Result<f64> {
    let beta = Penalty::new(beta)?.beta();
    check_dim("penalty_lipschitz point", prob.dim(), x.len())?;
    check_dim("penalty_lipschitz multipliers", prob.num_ineq(), z.len())?;
    penalty_lipschitz_raw(prob.constraint_values(x).view(), z, beta, prob)
}

pub(crate) fn penalty_lipschitz_raw(
    fvals: ArrayView1<f64>,
    z: ArrayView1<f64>,
    beta: f64,
    prob: &ProblemInstance,
) -> Result<f64> {
    let mut total = 0.0;
    for (j, c) in prob.constraints().iter().enumerate() {
        let b = c
            .grad_bound
            .ok_or_else(|| Error::MissingConstants(format!("gradient bound B_{j}")))?;
        let l = c
            .lipschitz()
            .ok_or_else(|| Error::MissingConstants(format!("Lipschitz constant L_{j}")))?;
        total += beta * b * b + l * pos(beta * fvals[j] + z[j]);
    }
    Ok(total)
}

/// `L_F(x, z) = L_g + beta ||A||^2 + L_Psi(x, z)`.
pub fn smooth_lipschitz(
    x: ArrayView1<f64>,
    z: ArrayView1<f64>,
    beta: f64,
    prob: &ProblemInstance,
) -> Result<f64> {
    let lg = objective_lipschitz(prob)?;
    Ok(lg + beta * prob.a_norm_sq() + penalty_lipschitz(x, z, beta, prob)?)
}

pub(crate) fn objective_lipschitz(prob: &ProblemInstance) -> Result<f64> {
    prob.objective()
        .lipschitz()
        .ok_or_else(|| Error::MissingConstants("Lipschitz constant L_g".into()))
}

/// `grad_x Psi(x, z)`, used to validate the Lipschitz estimate.
pub fn penalty_gradient(
    x: ArrayView1<f64>,
    z: ArrayView1<f64>,
    beta: f64,
    prob: &ProblemInstance,
) -> Result<Array1<f64>> {
    let beta = Penalty::new(beta)?.beta();
    check_dim("penalty_gradient multipliers", prob.num_ineq(), z.len())?;
    let mut grad = Array1::zeros(prob.dim());
    for (j, c) in prob.constraints().iter().enumerate() {
        let weight = pos(beta * c.func.value(x) + z[j]);
        if weight > 0.0 {
            grad.scaled_add(weight, &c.func.gradient(x));
        }
    }
    Ok(grad)
}

fn check_point(w: &PrimalDualPoint, prob: &ProblemInstance) -> Result<()> {
    check_dim("point x", prob.dim(), w.x.len())?;
    check_dim("point y", prob.num_eq(), w.y.len())?;
    check_dim("point r", prob.num_eq(), w.r.len())?;
    check_dim("point z", prob.num_ineq(), w.z.len())?;
    check_dim("point fvals", prob.num_ineq(), w.fvals.len())
}
