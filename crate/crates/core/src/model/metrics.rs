//! Optimality measures: the gap function, eps-optimality and KKT residuals.

use ndarray::{Array1, ArrayView1};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{norm, pos};
use crate::model::problem::{PrimalDualPoint, ProblemInstance};

/// `Phi(xbar; x, y, z) = f0(xbar) - f0(x) + y^T (A xbar - b) + sum_j z_j f_j(xbar)`.
pub fn phi_gap(xbar: ArrayView1<f64>, at: &PrimalDualPoint, prob: &ProblemInstance) -> Result<f64> {
    check_dim("phi_gap point", prob.dim(), xbar.len())?;
    check_dim("phi_gap base point", prob.dim(), at.x.len())?;
    check_dim("phi_gap y", prob.num_eq(), at.y.len())?;
    check_dim("phi_gap z", prob.num_ineq(), at.z.len())?;
    let eq = if prob.num_eq() > 0 {
        at.y.dot(&prob.residual(xbar))
    } else {
        0.0
    };
    let ineq = at.z.dot(&prob.constraint_values(xbar));
    Ok(prob.objective_value(xbar) - prob.objective_value(at.x.view()) + eq + ineq)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsOptimality {
    /// `|f0(xbar) - f0*|`
    pub objective_gap: f64,
    /// `||A xbar - b|| + sum_j [f_j(xbar)]_+`
    pub feasibility: f64,
    pub satisfied: bool,
}

pub fn eps_optimality(
    xbar: ArrayView1<f64>,
    f0_star: f64,
    eps: f64,
    prob: &ProblemInstance,
) -> Result<EpsOptimality> {
    if !f0_star.is_finite() {
        return Err(Error::InvalidParameter(format!("optimal value {f0_star}")));
    }
    check_dim("eps_optimality point", prob.dim(), xbar.len())?;
    let objective_gap = (prob.objective_value(xbar) - f0_star).abs();
    let feasibility = prob.feasibility(xbar);
    Ok(EpsOptimality {
        objective_gap,
        feasibility,
        satisfied: objective_gap <= eps && feasibility <= eps,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktResidual {
    pub stationarity: f64,
    pub feasibility: f64,
    pub complementarity: f64,
}

impl KktResidual {
    pub fn max(&self) -> f64 {
        self.stationarity
            .max(self.feasibility)
            .max(self.complementarity)
    }
}

/// KKT residual of `w`. Uses the cached `r` and `fvals` of `w`.
///
/// Stationarity is the prox-gradient fixed-point residual
/// `||x - prox_h(x - (grad g + A^T y + sum_j z_j grad f_j), 1)||`.
pub fn kkt_residual(w: &PrimalDualPoint, prob: &ProblemInstance) -> Result<KktResidual> {
    check_dim("kkt point", prob.dim(), w.x.len())?;
    check_dim("kkt y", prob.num_eq(), w.y.len())?;
    check_dim("kkt z", prob.num_ineq(), w.z.len())?;
    if let Some((index, &value)) = w.z.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
        return Err(Error::NegativeMultiplier { index, value });
    }
    let grad = lagrangian_gradient(w.x.view(), w.y.view(), w.z.view(), prob);
    Ok(kkt_from_parts(w, &grad, prob))
}

/// `grad g(x) + A^T y + sum_j z_j grad f_j(x)`.
pub(crate) fn lagrangian_gradient(
    x: ArrayView1<f64>,
    y: ArrayView1<f64>,
    z: ArrayView1<f64>,
    prob: &ProblemInstance,
) -> Array1<f64> {
    let mut grad = prob.objective().gradient(x);
    if prob.num_eq() > 0 {
        grad += &prob.adjoint(y);
    }
    for (c, &zj) in prob.constraints().iter().zip(z.iter()) {
        if zj != 0.0 {
            grad.scaled_add(zj, &c.func.gradient(x));
        }
    }
    grad
}

pub(crate) fn kkt_from_parts(
    w: &PrimalDualPoint,
    lagrangian_grad: &Array1<f64>,
    prob: &ProblemInstance,
) -> KktResidual {
    let trial = &w.x - lagrangian_grad;
    let p = prob.regularizer().prox(trial.view(), 1.0);
    let stationarity = norm((&w.x - &p).view());
    let feasibility = norm(w.r.view()) + w.fvals.iter().map(|&f| pos(f)).sum::<f64>();
    let complementarity =
        w.z.iter()
            .zip(w.fvals.iter())
            .map(|(z, f)| (z * f).abs())
            .sum::<f64>();
    KktResidual {
        stationarity,
        feasibility,
        complementarity,
    }
}
