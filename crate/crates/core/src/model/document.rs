//! JSON representation of problem instances.
//!
//! Matrices are stored row-major; unbounded box entries are `null`.

use std::sync::Arc;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::DenseOperator;
use crate::model::functions::{
    Epigraph, LeastSquares, Linear, Quadratic, SmoothFunction, ZeroFunction,
};
use crate::model::problem::{
    AffineConstraint, BlockPartition, InequalityConstraint, ProblemInstance,
};
use crate::model::prox::{
    bounds_from_doc, BoxDomain, BoxIndicator, L1Norm, ProxFunction, ZeroProx,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl From<Array2<f64>> for DenseMatrix {
    fn from(m: Array2<f64>) -> Self {
        let (rows, cols) = m.dim();
        Self {
            rows,
            cols,
            data: m.iter().copied().collect(),
        }
    }
}

impl TryFrom<&DenseMatrix> for Array2<f64> {
    type Error = Error;

    fn try_from(m: &DenseMatrix) -> Result<Self> {
        Array2::from_shape_vec((m.rows, m.cols), m.data.clone())
            .map_err(|e| Error::InvalidParameter(format!("matrix {}x{}: {e}", m.rows, m.cols)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FunctionSpec {
    Zero {
        dim: usize,
    },
    Linear {
        c: Vec<f64>,
        d: f64,
    },
    Quadratic {
        q: DenseMatrix,
        c: Vec<f64>,
        d: f64,
    },
    LeastSquares {
        a: DenseMatrix,
        b: Vec<f64>,
        offset: f64,
    },
    Epigraph {
        inner: Box<FunctionSpec>,
    },
}

impl FunctionSpec {
    pub fn build(&self) -> Result<Arc<dyn SmoothFunction>> {
        Ok(match self {
            FunctionSpec::Zero { dim } => Arc::new(ZeroFunction::new(*dim)),
            FunctionSpec::Linear { c, d } => Arc::new(Linear::new(Array1::from(c.clone()), *d)),
            FunctionSpec::Quadratic { q, c, d } => {
                Arc::new(Quadratic::new(q.try_into()?, Array1::from(c.clone()), *d)?)
            }
            FunctionSpec::LeastSquares { a, b, offset } => Arc::new(LeastSquares::new(
                a.try_into()?,
                Array1::from(b.clone()),
                *offset,
            )?),
            FunctionSpec::Epigraph { inner } => Arc::new(Epigraph::new(inner.build()?)),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProxSpec {
    Zero {
        dim: usize,
    },
    L1 {
        scale: f64,
        lower: Option<Vec<Option<f64>>>,
        upper: Option<Vec<Option<f64>>>,
    },
    Box {
        lower: Vec<Option<f64>>,
        upper: Vec<Option<f64>>,
    },
}

impl ProxSpec {
    pub fn build(&self) -> Result<Arc<dyn ProxFunction>> {
        Ok(match self {
            ProxSpec::Zero { dim } => Arc::new(ZeroProx::new(*dim)),
            ProxSpec::L1 {
                scale,
                lower,
                upper,
            } => {
                let h = L1Norm::new(*scale)?;
                match (lower, upper) {
                    (Some(l), Some(u)) => Arc::new(h.with_box(BoxDomain::new(
                        bounds_from_doc(l, f64::NEG_INFINITY),
                        bounds_from_doc(u, f64::INFINITY),
                    )?)),
                    _ => Arc::new(h),
                }
            }
            ProxSpec::Box { lower, upper } => Arc::new(BoxIndicator::new(BoxDomain::new(
                bounds_from_doc(lower, f64::NEG_INFINITY),
                bounds_from_doc(upper, f64::INFINITY),
            )?)),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineSpec {
    pub a: DenseMatrix,
    pub b: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSpec {
    pub function: FunctionSpec,
    pub grad_bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceDocument {
    pub dim: usize,
    pub objective: FunctionSpec,
    pub regularizer: ProxSpec,
    #[serde(default)]
    pub affine: Option<AffineSpec>,
    #[serde(default)]
    pub constraints: Vec<ConstraintSpec>,
    /// `[start, end)` pairs.
    #[serde(default)]
    pub blocks: Option<Vec<(usize, usize)>>,
    #[serde(default)]
    pub optimal_value: Option<f64>,
    /// Generator spec and seed.
    #[serde(default)]
    pub metadata: serde_json::Value,
}

impl InstanceDocument {
    pub fn from_problem(prob: &ProblemInstance, metadata: serde_json::Value) -> Result<Self> {
        let unsupported = |what: &str| Error::Unknown {
            what: "serializable representation",
            name: what.to_string(),
        };
        let objective = prob
            .objective()
            .describe()
            .ok_or_else(|| unsupported("objective"))?;
        let regularizer = prob
            .regularizer()
            .describe()
            .ok_or_else(|| unsupported("regularizer"))?;
        let affine = prob.affine().map(|a| AffineSpec {
            a: a.operator().to_dense().into(),
            b: a.rhs().to_vec(),
        });
        let constraints = prob
            .constraints()
            .iter()
            .map(|c| {
                Ok(ConstraintSpec {
                    function: c.func.describe().ok_or_else(|| unsupported("constraint"))?,
                    grad_bound: c.grad_bound,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let blocks = prob
            .partition()
            .map(|p| p.ranges().iter().map(|r| (r.start, r.end)).collect());
        Ok(Self {
            dim: prob.dim(),
            objective,
            regularizer,
            affine,
            constraints,
            blocks,
            optimal_value: prob.optimal_value(),
            metadata,
        })
    }

    pub fn to_problem(&self) -> Result<ProblemInstance> {
        let mut b = ProblemInstance::builder(self.objective.build()?, self.regularizer.build()?);
        if let Some(a) = &self.affine {
            let m: Array2<f64> = (&a.a).try_into()?;
            b = b.affine(AffineConstraint::new(
                Arc::new(DenseOperator::new(m)),
                Array1::from(a.b.clone()),
            )?);
        }
        for c in &self.constraints {
            let mut ic = InequalityConstraint::new(c.function.build()?);
            ic.grad_bound = c.grad_bound;
            b = b.constraint(ic);
        }
        if let Some(blocks) = &self.blocks {
            b = b.partition(BlockPartition::new(
                blocks.iter().map(|&(s, e)| s..e).collect(),
                self.dim,
            )?);
        }
        if let Some(v) = self.optimal_value {
            b = b.optimal_value(v);
        }
        b.build()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Hex SHA-256 of the problem data (metadata excluded).
    pub fn content_hash(&self) -> Result<String> {
        let mut stripped = self.clone();
        stripped.metadata = serde_json::Value::Null;
        stripped.optimal_value = None;
        let bytes = serde_json::to_vec(&stripped)?;
        Ok(hex::encode(Sha256::digest(&bytes)))
    }
}
