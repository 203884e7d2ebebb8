use std::sync::Arc;

use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{gaussian, gaussian_matrix};
use crate::error::{Error, Result};
use crate::linalg::norm_sq;
use crate::model::{
    BoxDomain, InequalityConstraint, InstanceDocument, L1Norm, LeastSquares, ProblemInstance,
    ZeroFunction,
};

/// How the noise level `delta` in `||Ax - b||^2 <= delta` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaPolicy {
    /// The realized noise power `||noise * xi||^2`.
    NoisePower,
    /// A multiple of the realized noise power.
    Scaled(f64),
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BpdnSpec {
    pub rows: usize,
    pub cols: usize,
    pub sparsity: usize,
    pub noise: f64,
    pub delta: DeltaPolicy,
    pub seed: u64,
    /// Optional box `[-bound, bound]` on `x`, which makes analytic steps available.
    pub bound: Option<f64>,
}

impl Default for BpdnSpec {
    fn default() -> Self {
        Self {
            rows: 50,
            cols: 100,
            sparsity: 5,
            noise: 0.1,
            delta: DeltaPolicy::NoisePower,
            seed: 0,
            bound: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BpdnInstance {
    pub problem: ProblemInstance,
    pub a: Array2<f64>,
    pub b: Array1<f64>,
    pub delta: f64,
    /// The sparse signal the measurements came from.
    pub x_true: Array1<f64>,
    pub spec: Option<BpdnSpec>,
}

impl BpdnInstance {
    /// Minimum-norm least-squares point `A^+ b`, clipped to the box if any.
    /// It satisfies the constraint strictly whenever `b` lies in the range of `A`.
    pub fn least_norm_start(&self) -> Result<Array1<f64>> {
        let (m, n) = self.a.dim();
        let a = nalgebra::DMatrix::from_fn(m, n, |i, j| self.a[[i, j]]);
        let b = nalgebra::DVector::from_iterator(m, self.b.iter().copied());
        let x = a
            .svd(true, true)
            .solve(&b, 1e-12)
            .map_err(|e| Error::InvalidParameter(format!("least-norm start: {e}")))?;
        let mut x0 = Array1::from_iter(x.iter().copied());
        if let Some(r) = self.spec.as_ref().and_then(|s| s.bound) {
            x0.mapv_inplace(|v| v.clamp(-r, r));
        }
        Ok(x0)
    }

    pub fn document(&self) -> Result<InstanceDocument> {
        InstanceDocument::from_problem(
            &self.problem,
            serde_json::json!({
                "kind": "bpdn",
                "spec": self.spec,
                "x_true": self.x_true.to_vec(),
            }),
        )
    }
}

/// `min ||x||_1  s.t.  ||Ax - b||^2 <= delta` with Gaussian `A`, a sparse
/// Gaussian signal `x_true` and `b = A x_true + noise * xi`.
pub fn gen_bpdn(spec: &BpdnSpec) -> Result<BpdnInstance> {
    if spec.sparsity > spec.cols || spec.rows == 0 || spec.cols == 0 {
        return Err(Error::InvalidParameter(format!(
            "bpdn size {}x{} with {} nonzeros",
            spec.rows, spec.cols, spec.sparsity
        )));
    }
    if !(spec.noise >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "noise scale {}",
            spec.noise
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let a = gaussian_matrix(&mut rng, spec.rows, spec.cols);
    let mut x_true = Array1::zeros(spec.cols);
    let support = rand::seq::index::sample(&mut rng, spec.cols, spec.sparsity);
    let values = gaussian(&mut rng, spec.sparsity);
    for (i, v) in support.iter().zip(values.iter()) {
        x_true[i] = *v;
    }
    let noise = gaussian(&mut rng, spec.rows) * spec.noise;
    let b = a.dot(&x_true) + &noise;
    let power = norm_sq(noise.view());
    let delta = match spec.delta {
        DeltaPolicy::NoisePower => power,
        DeltaPolicy::Scaled(s) => s * power,
        DeltaPolicy::Fixed(d) => d,
    };
    let mut inst = bpdn_from_data(a, b, delta, spec.bound)?;
    inst.x_true = x_true;
    inst.spec = Some(spec.clone());
    Ok(inst)
}

/// BPDN from explicit data.
pub fn bpdn_from_data(
    a: Array2<f64>,
    b: Array1<f64>,
    delta: f64,
    bound: Option<f64>,
) -> Result<BpdnInstance> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "bpdn delta = {delta} must be positive"
        )));
    }
    let cols = a.ncols();
    let mut h = L1Norm::new(1.0)?;
    let mut constraint =
        InequalityConstraint::new(Arc::new(LeastSquares::new(a.clone(), b.clone(), delta)?));
    if let Some(r) = bound {
        let domain = BoxDomain::uniform(cols, -r, r)?;
        constraint = constraint.with_derived_bound(&domain);
        h = h.with_box(domain);
    }
    let problem = ProblemInstance::builder(Arc::new(ZeroFunction::new(cols)), Arc::new(h))
        .constraint(constraint)
        .build()?;
    Ok(BpdnInstance {
        problem,
        a,
        b,
        delta,
        x_true: Array1::zeros(cols),
        spec: None,
    })
}
