use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use ndarray::array;
use serde::{Deserialize, Serialize};

use super::{bpdn_from_data, Provenance, ReferenceSolution};
use crate::error::{Error, Result};
use crate::linalg::DenseOperator;
use crate::model::{
    AffineConstraint, BoxDomain, BoxIndicator, InequalityConstraint, ProblemInstance, Quadratic,
    ZeroProx,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TinyKind {
    /// `min 1/2 ||x||^2  s.t.  x_1 + x_2 = 1`.
    EqualityQp,
    /// `min 1/2 x^2 + 2x  s.t.  x^2 - 1 <= 0`, `x in [-10, 10]`.
    ScalarQcqp,
    /// `min |x|  s.t.  (x - 2)^2 - 1 <= 0`, `x in [-10, 10]`.
    ScalarBpdn,
}

impl TinyKind {
    pub const ALL: [TinyKind; 3] = [
        TinyKind::EqualityQp,
        TinyKind::ScalarQcqp,
        TinyKind::ScalarBpdn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TinyKind::EqualityQp => "equality-qp",
            TinyKind::ScalarQcqp => "scalar-qcqp",
            TinyKind::ScalarBpdn => "scalar-bpdn",
        }
    }
}

impl fmt::Display for TinyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TinyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TinyKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Unknown {
                what: "tiny instance",
                name: s.to_string(),
            })
    }
}

/// A small instance with its exact KKT triple.
pub fn tiny_reference(kind: TinyKind) -> Result<(ProblemInstance, ReferenceSolution)> {
    let (prob, x, y, z, f0) = match kind {
        TinyKind::EqualityQp => {
            let prob = ProblemInstance::builder(
                Arc::new(Quadratic::new(
                    array![[1.0, 0.0], [0.0, 1.0]],
                    array![0.0, 0.0],
                    0.0,
                )?),
                Arc::new(ZeroProx::new(2)),
            )
            .affine(AffineConstraint::new(
                Arc::new(DenseOperator::new(array![[1.0, 1.0]])),
                array![1.0],
            )?)
            .build()?;
            (prob, vec![0.5, 0.5], vec![-0.5], vec![], 0.25)
        }
        TinyKind::ScalarQcqp => {
            let domain = BoxDomain::uniform(1, -10.0, 10.0)?;
            let prob = ProblemInstance::builder(
                Arc::new(Quadratic::new(array![[1.0]], array![2.0], 0.0)?),
                Arc::new(BoxIndicator::new(domain.clone())),
            )
            .constraint(
                InequalityConstraint::new(Arc::new(Quadratic::new(
                    array![[2.0]],
                    array![0.0],
                    -1.0,
                )?))
                .with_derived_bound(&domain),
            )
            .build()?;
            (prob, vec![-1.0], vec![], vec![0.5], -1.5)
        }
        TinyKind::ScalarBpdn => {
            let prob = bpdn_from_data(array![[1.0]], array![2.0], 1.0, Some(10.0))?.problem;
            (prob, vec![1.0], vec![], vec![0.5], 1.0)
        }
    };
    let mut sol = ReferenceSolution {
        x,
        y,
        z,
        f0,
        provenance: Provenance::Hand,
        kkt: None,
    };
    sol.verify(&prob)?;
    Ok((prob.with_optimal_value(Some(f0)), sol))
}
