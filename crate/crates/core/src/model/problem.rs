//! Problem data: `min g(x) + h(x)  s.t.  Ax = b,  f_j(x) <= 0`.

use std::ops::Range;
use std::sync::Arc;

use ndarray::{Array1, ArrayView1};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{norm, operator_norm_sq, pos, LinearOperator, NORM_TOL};
use crate::model::functions::SmoothFunction;
use crate::model::prox::{BoxDomain, ProxFunction};

/// Contiguous, disjoint index ranges covering `0..dim` in order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockPartition {
    ranges: Vec<Range<usize>>,
}

impl BlockPartition {
    pub fn new(ranges: Vec<Range<usize>>, dim: usize) -> Result<Self> {
        if ranges.is_empty() {
            return Err(Error::InvalidPartition("no blocks".into()));
        }
        let mut next = 0;
        for (i, r) in ranges.iter().enumerate() {
            if r.start != next {
                return Err(Error::InvalidPartition(format!(
                    "block {i} starts at {} but previous block ended at {next}",
                    r.start
                )));
            }
            if r.is_empty() {
                return Err(Error::InvalidPartition(format!("block {i} is empty")));
            }
            next = r.end;
        }
        if next != dim {
            return Err(Error::InvalidPartition(format!(
                "blocks cover 0..{next}, expected 0..{dim}"
            )));
        }
        Ok(Self { ranges })
    }

    /// `n` nearly equal contiguous blocks; the first `dim % n` get one extra index.
    pub fn even(dim: usize, n: usize) -> Result<Self> {
        if n == 0 || n > dim {
            return Err(Error::InvalidPartition(format!(
                "cannot split {dim} coordinates into {n} blocks"
            )));
        }
        let base = dim / n;
        let extra = dim % n;
        let mut ranges = Vec::with_capacity(n);
        let mut start = 0;
        for i in 0..n {
            let len = base + usize::from(i < extra);
            ranges.push(start..start + len);
            start += len;
        }
        Self::new(ranges, dim)
    }

    pub fn len(&self) -> usize {
        self.ranges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty()
    }

    pub fn block(&self, i: usize) -> Range<usize> {
        self.ranges[i].clone()
    }

    pub fn ranges(&self) -> &[Range<usize>] {
        &self.ranges
    }

    pub fn dim(&self) -> usize {
        self.ranges.last().map_or(0, |r| r.end)
    }
}

/// `Ax = b` with the squared operator norm cached.
#[derive(Debug, Clone)]
pub struct AffineConstraint {
    op: Arc<dyn LinearOperator>,
    rhs: Array1<f64>,
    norm_sq: f64,
}

impl AffineConstraint {
    pub fn new(op: Arc<dyn LinearOperator>, rhs: Array1<f64>) -> Result<Self> {
        check_dim("affine constraint rhs", op.rows(), rhs.len())?;
        let norm_sq = operator_norm_sq(op.as_ref(), NORM_TOL)?;
        Ok(Self { op, rhs, norm_sq })
    }

    pub fn operator(&self) -> &dyn LinearOperator {
        self.op.as_ref()
    }

    pub fn rhs(&self) -> &Array1<f64> {
        &self.rhs
    }

    /// `||A||^2`.
    pub fn norm_sq(&self) -> f64 {
        self.norm_sq
    }

    pub fn residual(&self, x: ArrayView1<f64>) -> Array1<f64> {
        self.op.apply(x) - &self.rhs
    }
}

/// `f_j(x) <= 0`, with an optional bound `B_j` on `||grad f_j||` over `dom(h)`.
#[derive(Debug, Clone)]
pub struct InequalityConstraint {
    pub func: Arc<dyn SmoothFunction>,
    pub grad_bound: Option<f64>,
}

impl InequalityConstraint {
    pub fn new(func: Arc<dyn SmoothFunction>) -> Self {
        Self {
            func,
            grad_bound: None,
        }
    }

    pub fn with_grad_bound(mut self, bound: f64) -> Self {
        self.grad_bound = Some(bound);
        self
    }

    /// Fills `B_j` from the function itself when the domain box allows it.
    pub fn with_derived_bound(mut self, domain: &BoxDomain) -> Self {
        self.grad_bound = self.func.gradient_bound(domain);
        self
    }

    pub fn lipschitz(&self) -> Option<f64> {
        self.func.lipschitz()
    }
}

/// An immutable problem instance; share it behind `Arc` across solves.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    dim: usize,
    objective: Arc<dyn SmoothFunction>,
    regularizer: Arc<dyn ProxFunction>,
    affine: Option<AffineConstraint>,
    constraints: Vec<InequalityConstraint>,
    partition: Option<BlockPartition>,
    optimal_value: Option<f64>,
}

pub struct ProblemBuilder {
    objective: Arc<dyn SmoothFunction>,
    regularizer: Arc<dyn ProxFunction>,
    affine: Option<AffineConstraint>,
    constraints: Vec<InequalityConstraint>,
    partition: Option<BlockPartition>,
    optimal_value: Option<f64>,
}

impl ProblemBuilder {
    pub fn affine(mut self, affine: AffineConstraint) -> Self {
        self.affine = Some(affine);
        self
    }

    pub fn constraint(mut self, c: InequalityConstraint) -> Self {
        self.constraints.push(c);
        self
    }

    pub fn constraints(mut self, cs: impl IntoIterator<Item = InequalityConstraint>) -> Self {
        self.constraints.extend(cs);
        self
    }

    pub fn partition(mut self, p: BlockPartition) -> Self {
        self.partition = Some(p);
        self
    }

    pub fn optimal_value(mut self, v: f64) -> Self {
        self.optimal_value = Some(v);
        self
    }

    pub fn build(self) -> Result<ProblemInstance> {
        let dim = self.objective.dim();
        if let Some(hd) = self.regularizer.dim() {
            check_dim("regularizer", dim, hd)?;
        }
        if let Some(a) = &self.affine {
            check_dim("affine operator columns", dim, a.operator().cols())?;
        }
        for c in &self.constraints {
            check_dim("inequality constraint", dim, c.func.dim())?;
        }
        if let Some(p) = &self.partition {
            check_dim("block partition", dim, p.dim())?;
        }
        Ok(ProblemInstance {
            dim,
            objective: self.objective,
            regularizer: self.regularizer,
            affine: self.affine,
            constraints: self.constraints,
            partition: self.partition,
            optimal_value: self.optimal_value,
        })
    }
}

impl ProblemInstance {
    pub fn builder(
        objective: Arc<dyn SmoothFunction>,
        regularizer: Arc<dyn ProxFunction>,
    ) -> ProblemBuilder {
        ProblemBuilder {
            objective,
            regularizer,
            affine: None,
            constraints: Vec::new(),
            partition: None,
            optimal_value: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn objective(&self) -> &dyn SmoothFunction {
        self.objective.as_ref()
    }

    pub fn objective_arc(&self) -> &Arc<dyn SmoothFunction> {
        &self.objective
    }

    pub fn regularizer(&self) -> &dyn ProxFunction {
        self.regularizer.as_ref()
    }

    pub fn regularizer_arc(&self) -> &Arc<dyn ProxFunction> {
        &self.regularizer
    }

    pub fn affine(&self) -> Option<&AffineConstraint> {
        self.affine.as_ref()
    }

    pub fn constraints(&self) -> &[InequalityConstraint] {
        &self.constraints
    }

    pub fn partition(&self) -> Option<&BlockPartition> {
        self.partition.as_ref()
    }

    pub fn optimal_value(&self) -> Option<f64> {
        self.optimal_value
    }

    /// Same problem with a different block partition.
    pub fn with_partition(&self, p: BlockPartition) -> Result<Self> {
        check_dim("block partition", self.dim, p.dim())?;
        let mut out = self.clone();
        out.partition = Some(p);
        Ok(out)
    }

    pub fn with_optimal_value(&self, v: Option<f64>) -> Self {
        let mut out = self.clone();
        out.optimal_value = v;
        out
    }

    /// Number of equality rows (0 when there is no affine part).
    pub fn num_eq(&self) -> usize {
        self.affine.as_ref().map_or(0, |a| a.rhs.len())
    }

    pub fn num_ineq(&self) -> usize {
        self.constraints.len()
    }

    /// `||A||^2`, zero without an affine part.
    pub fn a_norm_sq(&self) -> f64 {
        self.affine.as_ref().map_or(0.0, |a| a.norm_sq)
    }

    pub fn residual(&self, x: ArrayView1<f64>) -> Array1<f64> {
        match &self.affine {
            Some(a) => a.residual(x),
            None => Array1::zeros(0),
        }
    }

    /// `A^T y` (zero vector without an affine part).
    pub fn adjoint(&self, y: ArrayView1<f64>) -> Array1<f64> {
        match &self.affine {
            Some(a) => a.operator().apply_adjoint(y),
            None => Array1::zeros(self.dim),
        }
    }

    pub fn constraint_values(&self, x: ArrayView1<f64>) -> Array1<f64> {
        self.constraints.iter().map(|c| c.func.value(x)).collect()
    }

    /// `f_0(x) = g(x) + h(x)`.
    pub fn objective_value(&self, x: ArrayView1<f64>) -> f64 {
        self.objective.value(x) + self.regularizer.value(x)
    }

    /// `||Ax - b|| + sum_j [f_j(x)]_+`.
    pub fn feasibility(&self, x: ArrayView1<f64>) -> f64 {
        let r = self.residual(x);
        norm(r.view())
            + self
                .constraint_values(x)
                .iter()
                .map(|&f| pos(f))
                .sum::<f64>()
    }

    /// Domain box of `h`, or the whole space.
    pub fn domain(&self) -> BoxDomain {
        self.regularizer
            .domain()
            .cloned()
            .unwrap_or_else(|| BoxDomain::unbounded(self.dim))
    }
}

/// The triple `w = (x, y, z)` with `r = Ax - b` and `f_j(x)` cached.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimalDualPoint {
    pub x: Array1<f64>,
    pub y: Array1<f64>,
    pub z: Array1<f64>,
    pub r: Array1<f64>,
    pub fvals: Array1<f64>,
}

impl PrimalDualPoint {
    pub fn new(
        prob: &ProblemInstance,
        x: Array1<f64>,
        y: Array1<f64>,
        z: Array1<f64>,
    ) -> Result<Self> {
        check_dim("primal point", prob.dim(), x.len())?;
        check_dim("equality multipliers", prob.num_eq(), y.len())?;
        check_dim("inequality multipliers", prob.num_ineq(), z.len())?;
        if let Some((index, &value)) = z.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
            return Err(Error::NegativeMultiplier { index, value });
        }
        let r = prob.residual(x.view());
        let fvals = prob.constraint_values(x.view());
        Ok(Self { x, y, z, r, fvals })
    }

    /// Zero multipliers at `x`.
    pub fn primal(prob: &ProblemInstance, x: Array1<f64>) -> Result<Self> {
        Self::new(
            prob,
            x,
            Array1::zeros(prob.num_eq()),
            Array1::zeros(prob.num_ineq()),
        )
    }

    pub fn refresh(&mut self, prob: &ProblemInstance) {
        self.r = prob.residual(self.x.view());
        self.fvals = prob.constraint_values(self.x.view());
    }

    /// Whether the caches agree with recomputation to `tol` relative.
    pub fn caches_consistent(&self, prob: &ProblemInstance, tol: f64) -> bool {
        let close = |a: &Array1<f64>, b: &Array1<f64>| {
            a.iter()
                .zip(b.iter())
                .all(|(u, v)| (u - v).abs() <= tol * (1.0 + v.abs()))
        };
        close(&self.r, &prob.residual(self.x.view()))
            && close(&self.fvals, &prob.constraint_values(self.x.view()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DenseOperator;
    use crate::model::functions::{Linear, Quadratic, ZeroFunction};
    use crate::model::prox::ZeroProx;
    use ndarray::array;

    #[test]
    fn even_partition_covers() {
        let p = BlockPartition::even(10, 3).unwrap();
        assert_eq!(p.ranges(), &[0..4, 4..7, 7..10]);
        assert!(BlockPartition::even(3, 4).is_err());
        assert!(BlockPartition::new(vec![0..2, 3..4], 4).is_err());
        assert!(BlockPartition::new(vec![0..2, 2..3], 4).is_err());
    }

    #[test]
    fn empty_affine_part_gives_empty_terms() {
        let prob =
            ProblemInstance::builder(Arc::new(ZeroFunction::new(2)), Arc::new(ZeroProx::new(2)))
                .build()
                .unwrap();
        let x = array![1.0, 2.0];
        assert_eq!(prob.residual(x.view()).len(), 0);
        assert_eq!(prob.adjoint(Array1::zeros(0).view()), array![0.0, 0.0]);
        assert_eq!(prob.feasibility(x.view()), 0.0);
        assert_eq!(prob.a_norm_sq(), 0.0);
    }

    #[test]
    fn dimension_checks() {
        let res =
            ProblemInstance::builder(Arc::new(ZeroFunction::new(2)), Arc::new(ZeroProx::new(3)))
                .build();
        assert!(matches!(res, Err(Error::DimensionMismatch { .. })));
        let res =
            ProblemInstance::builder(Arc::new(ZeroFunction::new(2)), Arc::new(ZeroProx::new(2)))
                .constraint(InequalityConstraint::new(Arc::new(Linear::new(
                    array![1.0],
                    0.0,
                ))))
                .build();
        assert!(res.is_err());
    }

    #[test]
    fn point_caches_and_negative_multipliers() {
        let a = AffineConstraint::new(
            Arc::new(DenseOperator::new(array![[1.0, 1.0]])),
            array![1.0],
        )
        .unwrap();
        let prob = ProblemInstance::builder(
            Arc::new(
                Quadratic::new(array![[1.0, 0.0], [0.0, 1.0]], array![0.0, 0.0], 0.0).unwrap(),
            ),
            Arc::new(ZeroProx::new(2)),
        )
        .affine(a)
        .constraint(InequalityConstraint::new(Arc::new(Linear::new(
            array![1.0, 0.0],
            -1.0,
        ))))
        .build()
        .unwrap();
        let w = PrimalDualPoint::new(&prob, array![2.0, 0.0], array![0.0], array![0.0]).unwrap();
        assert_eq!(w.r, array![1.0]);
        assert_eq!(w.fvals, array![1.0]);
        assert!(w.caches_consistent(&prob, 1e-9));
        let bad = PrimalDualPoint::new(&prob, array![2.0, 0.0], array![0.0], array![-1.0]);
        assert!(matches!(
            bad,
            Err(Error::NegativeMultiplier { index: 0, .. })
        ));
    }
}
