use std::sync::Arc;

use ndarray::{Array1, Array2, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::model::{
    BoxDomain, BoxIndicator, Epigraph, InequalityConstraint, Linear, ProblemInstance, Quadratic,
    SmoothFunction,
};

/// `min_x max_j f_j(x)` over a box, as
/// `min_{x, t} t  s.t.  f_j(x) - t <= 0` with `t` free.
pub fn minimax_reformulate(
    fs: &[Arc<dyn SmoothFunction>],
    domain: &BoxDomain,
) -> Result<ProblemInstance> {
    let first = fs
        .first()
        .ok_or_else(|| Error::InvalidParameter("minimax needs at least one function".into()))?;
    let p = first.dim();
    check_dim("minimax box", p, domain.dim())?;
    for f in fs {
        check_dim("minimax function", p, f.dim())?;
    }
    let mut lower = domain.lower().to_vec();
    let mut upper = domain.upper().to_vec();
    lower.push(f64::NEG_INFINITY);
    upper.push(f64::INFINITY);
    let full = BoxDomain::new(Array1::from(lower), Array1::from(upper))?;
    let mut c = Array1::zeros(p + 1);
    c[p] = 1.0;
    let constraints: Vec<_> = fs
        .iter()
        .map(|f| {
            InequalityConstraint::new(Arc::new(Epigraph::new(f.clone()))).with_derived_bound(&full)
        })
        .collect();
    ProblemInstance::builder(
        Arc::new(Linear::new(c, 0.0)),
        Arc::new(BoxIndicator::new(full)),
    )
    .constraints(constraints)
    .build()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimaxSpec {
    /// Number of functions.
    pub m: usize,
    pub p: usize,
    pub lower: f64,
    pub upper: f64,
    pub seed: u64,
}

impl Default for MinimaxSpec {
    fn default() -> Self {
        Self {
            m: 3,
            p: 1,
            lower: -5.0,
            upper: 5.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MinimaxInstance {
    pub problem: ProblemInstance,
    pub functions: Vec<Arc<dyn SmoothFunction>>,
    pub domain: BoxDomain,
}

impl MinimaxInstance {
    /// `max_j f_j(x)`.
    pub fn max_value(&self, x: ArrayView1<f64>) -> f64 {
        self.functions
            .iter()
            .map(|f| f.value(x))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// A feasible starting point `(x0, max_j f_j(x0))`.
    pub fn start(&self, x0: ArrayView1<f64>) -> Array1<f64> {
        let mut v = x0.to_vec();
        v.push(self.max_value(x0));
        Array1::from(v)
    }
}

/// Random convex quadratics `a_j/2 ||x - s_j||^2 + e_j` with
/// `a_j in [0.5, 3]`, `s_j in [-3, 3]^p`, `e_j in [-1, 1]`.
pub fn gen_minimax(spec: &MinimaxSpec) -> Result<MinimaxInstance> {
    if spec.m == 0 || spec.p == 0 {
        return Err(Error::InvalidParameter("minimax needs m, p >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let functions = (0..spec.m)
        .map(|_| {
            let a: f64 = rng.random_range(0.5..3.0);
            let s: Array1<f64> = (0..spec.p).map(|_| rng.random_range(-3.0..3.0)).collect();
            let e: f64 = rng.random_range(-1.0..1.0);
            let q = Array2::eye(spec.p) * a;
            let d = 0.5 * a * s.dot(&s) + e;
            Ok(Arc::new(Quadratic::new(q, &s * -a, d)?) as Arc<dyn SmoothFunction>)
        })
        .collect::<Result<Vec<_>>>()?;
    let domain = BoxDomain::uniform(spec.p, spec.lower, spec.upper)?;
    let problem = minimax_reformulate(&functions, &domain)?;
    Ok(MinimaxInstance {
        problem,
        functions,
        domain,
    })
}
