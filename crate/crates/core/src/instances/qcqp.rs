use std::sync::Arc;

use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{gaussian, gaussian_matrix};
use crate::error::{Error, Result};
use crate::linalg::gram;
use crate::model::{BoxDomain, BoxIndicator, InequalityConstraint, ProblemInstance, Quadratic};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QcqpSpec {
    /// Number of quadratic constraints.
    pub m: usize,
    pub p: usize,
    pub lower: f64,
    pub upper: f64,
    /// Constant term of every constraint; must be negative.
    pub d: f64,
    pub seed: u64,
}

impl Default for QcqpSpec {
    fn default() -> Self {
        Self {
            m: 10,
            p: 2000,
            lower: -10.0,
            upper: 10.0,
            d: -1.0,
            seed: 0,
        }
    }
}

/// `min 1/2 x^T Q_0 x + c_0^T x  s.t.  1/2 x^T Q_j x + c_j^T x + d_j <= 0`,
/// `lower <= x <= upper`, with `Q_j = M_j^T M_j / p` for Gaussian `M_j`.
pub fn gen_qcqp(spec: &QcqpSpec) -> Result<ProblemInstance> {
    if spec.p == 0 {
        return Err(Error::InvalidParameter("qcqp dimension 0".into()));
    }
    if !(spec.d < 0.0) {
        return Err(Error::InvalidParameter(format!(
            "constraint constant {} must be negative",
            spec.d
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let p = spec.p;
    let mut draw = || {
        let m = gaussian_matrix(&mut rng, p, p);
        let c = gaussian(&mut rng, p);
        (gram(&m, p as f64), c)
    };
    let (q0, c0) = draw();
    let constraints: Vec<_> = (0..spec.m)
        .map(|_| {
            let (q, c) = draw();
            (q, c, spec.d)
        })
        .collect();
    let domain = BoxDomain::uniform(p, spec.lower, spec.upper)?;
    qcqp_from_data(q0, c0, constraints, domain)
}

/// QCQP from explicit data; bounds `B_j` are derived from the box.
pub fn qcqp_from_data(
    q0: Array2<f64>,
    c0: Array1<f64>,
    constraints: Vec<(Array2<f64>, Array1<f64>, f64)>,
    domain: BoxDomain,
) -> Result<ProblemInstance> {
    let objective = Arc::new(Quadratic::new(q0, c0, 0.0)?);
    let cs = constraints
        .into_iter()
        .map(|(q, c, d)| {
            Ok(
                InequalityConstraint::new(Arc::new(Quadratic::new(q, c, d)?))
                    .with_derived_bound(&domain),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    ProblemInstance::builder(objective, Arc::new(BoxIndicator::new(domain)))
        .constraints(cs)
        .build()
}
