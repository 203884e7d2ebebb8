use nalgebra::{DMatrix, DVector};
use ndarray::Array1;

use super::{Provenance, ReferenceSolution};
use crate::error::{Error, Result};
use crate::linalg::norm;
use crate::model::ProblemInstance;

/// Half-width used for coordinates the problem leaves unbounded.
pub const DEFAULT_SEARCH_RADIUS: f64 = 10.0;

const MAX_ROUNDS: usize = 200;
const ACTIVE_TOL: f64 = 1e-7;

/// Reference solution of a problem with at most three variables by grid
/// search with repeated zooming around the best feasible point.
///
/// Multipliers are the least-squares fit of the stationarity condition on
/// the coordinates where `h` is differentiable.
pub fn brute_force_reference(
    prob: &ProblemInstance,
    resolution: usize,
) -> Result<ReferenceSolution> {
    let dim = prob.dim();
    if dim == 0 || dim > 3 {
        return Err(Error::InvalidParameter(format!(
            "grid search supports 1 to 3 variables, got {dim}; use a long-run reference"
        )));
    }
    if resolution < 5 {
        return Err(Error::InvalidParameter(format!(
            "grid resolution {resolution} below 5"
        )));
    }
    let domain = prob.domain();
    let clamp_inf = |v: f64, fallback: f64| if v.is_finite() { v } else { fallback };
    let base_lo: Vec<f64> = domain
        .lower()
        .iter()
        .map(|&l| clamp_inf(l, -DEFAULT_SEARCH_RADIUS))
        .collect();
    let base_hi: Vec<f64> = domain
        .upper()
        .iter()
        .map(|&u| clamp_inf(u, DEFAULT_SEARCH_RADIUS))
        .collect();
    let a_norm = prob.a_norm_sq().sqrt();

    let (mut lo, mut hi) = (base_lo.clone(), base_hi.clone());
    let mut best: Option<(Array1<f64>, f64)> = None;
    for _ in 0..MAX_ROUNDS {
        let h: Vec<f64> = lo
            .iter()
            .zip(&hi)
            .map(|(l, u)| (u - l) / (resolution - 1) as f64)
            .collect();
        let eq_tol = a_norm * norm(Array1::from(h.clone()).view()) + 1e-14;
        let mut round_best: Option<(Array1<f64>, f64)> = None;
        let total = resolution.pow(dim as u32);
        for flat in 0..total {
            let mut rem = flat;
            let x: Array1<f64> = (0..dim)
                .map(|i| {
                    let k = rem % resolution;
                    rem /= resolution;
                    (lo[i] + k as f64 * h[i]).min(hi[i])
                })
                .collect();
            if prob.constraint_values(x.view()).iter().any(|&f| f > 0.0) {
                continue;
            }
            if prob.num_eq() > 0 && norm(prob.residual(x.view()).view()) > eq_tol {
                continue;
            }
            let v = prob.objective_value(x.view());
            if v.is_finite() && round_best.as_ref().is_none_or(|(_, b)| v < *b) {
                round_best = Some((x, v));
            }
        }
        let Some((x, v)) = round_best else {
            return Err(Error::InvalidParameter("no feasible grid point".into()));
        };
        let done = h
            .iter()
            .zip(x.iter())
            .all(|(hi, xi)| *hi <= 1e-13 * (1.0 + xi.abs()));
        for i in 0..dim {
            lo[i] = (x[i] - 3.0 * h[i]).max(base_lo[i]);
            hi[i] = (x[i] + 3.0 * h[i]).min(base_hi[i]);
        }
        best = Some((x, v));
        if done {
            break;
        }
    }
    let (x, f0) = best.expect("at least one round ran");
    let (y, z) = fit_multipliers(prob, &x)?;
    let mut sol = ReferenceSolution {
        x: x.to_vec(),
        y,
        z,
        f0,
        provenance: Provenance::BruteForce,
        kkt: None,
    };
    sol.verify(prob)?;
    Ok(sol)
}

fn fit_multipliers(prob: &ProblemInstance, x: &Array1<f64>) -> Result<(Vec<f64>, Vec<f64>)> {
    let dim = prob.dim();
    let m = prob.num_eq();
    let fvals = prob.constraint_values(x.view());
    let active: Vec<usize> = (0..prob.num_ineq())
        .filter(|&j| fvals[j] >= -ACTIVE_TOL)
        .collect();
    let dh = prob.regularizer().derivative_where_smooth(x.view());
    let rows: Vec<usize> = (0..dim).filter(|&i| dh[i].is_some()).collect();
    let unknowns = m + active.len();
    let mut y = vec![0.0; m];
    let mut z = vec![0.0; prob.num_ineq()];
    if unknowns == 0 || rows.is_empty() {
        return Ok((y, z));
    }
    let grad_g = prob.objective().gradient(x.view());
    let a_cols: Vec<Array1<f64>> = (0..m)
        .map(|k| {
            let mut e = Array1::zeros(m);
            e[k] = 1.0;
            prob.adjoint(e.view())
        })
        .collect();
    let f_grads: Vec<Array1<f64>> = active
        .iter()
        .map(|&j| prob.constraints()[j].func.gradient(x.view()))
        .collect();
    let mat = DMatrix::from_fn(rows.len(), unknowns, |r, c| {
        let i = rows[r];
        if c < m {
            a_cols[c][i]
        } else {
            f_grads[c - m][i]
        }
    });
    let rhs = DVector::from_fn(rows.len(), |r, _| {
        let i = rows[r];
        -(grad_g[i] + dh[i].unwrap_or(0.0))
    });
    let sol = mat
        .svd(true, true)
        .solve(&rhs, 1e-12)
        .map_err(|e| Error::InvalidParameter(format!("multiplier fit failed: {e}")))?;
    for k in 0..m {
        y[k] = sol[k];
    }
    for (c, &j) in active.iter().enumerate() {
        z[j] = sol[m + c].max(0.0);
    }
    Ok((y, z))
}
