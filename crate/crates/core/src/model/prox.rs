//! Proximable nonsmooth terms `h` and their proximal operators.

use std::fmt;
use std::ops::Range;

use ndarray::{s, Array1, ArrayView1, Zip};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{all_finite, norm};
use crate::model::document::ProxSpec;
use crate::model::problem::BlockPartition;

/// Componentwise soft-thresholding `sign(v) * max(|v| - tau, 0)`.
pub fn prox_l1(v: ArrayView1<f64>, tau: f64) -> Result<Array1<f64>> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "shrinkage threshold {tau}"
        )));
    }
    if !all_finite(v) {
        return Err(Error::NonFinite("prox_l1 input"));
    }
    Ok(v.mapv(|a| shrink(a, tau)))
}

/// Componentwise clamp of `v` into `[lower, upper]`.
pub fn project_box(
    v: ArrayView1<f64>,
    lower: ArrayView1<f64>,
    upper: ArrayView1<f64>,
) -> Result<Array1<f64>> {
    let dom = BoxDomain::new(lower.to_owned(), upper.to_owned())?;
    check_dim("project_box", dom.dim(), v.len())?;
    Ok(dom.project(v))
}

#[inline]
pub(crate) fn shrink(a: f64, tau: f64) -> f64 {
    a.signum() * (a.abs() - tau).max(0.0)
}

/// Axis-aligned box, entries may be infinite.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxDomain {
    lower: Array1<f64>,
    upper: Array1<f64>,
}

impl BoxDomain {
    pub fn new(lower: Array1<f64>, upper: Array1<f64>) -> Result<Self> {
        check_dim("box bounds", lower.len(), upper.len())?;
        for (index, (&l, &u)) in lower.iter().zip(upper.iter()).enumerate() {
            if l.is_nan() || u.is_nan() || l > u {
                return Err(Error::InvalidBox {
                    index,
                    lower: l,
                    upper: u,
                });
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn uniform(dim: usize, lower: f64, upper: f64) -> Result<Self> {
        Self::new(Array1::from_elem(dim, lower), Array1::from_elem(dim, upper))
    }

    pub fn unbounded(dim: usize) -> Self {
        Self {
            lower: Array1::from_elem(dim, f64::NEG_INFINITY),
            upper: Array1::from_elem(dim, f64::INFINITY),
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &Array1<f64> {
        &self.lower
    }

    pub fn upper(&self) -> &Array1<f64> {
        &self.upper
    }

    pub fn is_bounded(&self) -> bool {
        all_finite(self.lower.view()) && all_finite(self.upper.view())
    }

    pub fn contains(&self, x: ArrayView1<f64>) -> bool {
        x.len() == self.dim()
            && Zip::from(&x)
                .and(&self.lower)
                .and(&self.upper)
                .all(|&a, &l, &u| a >= l && a <= u)
    }

    pub fn project(&self, v: ArrayView1<f64>) -> Array1<f64> {
        Zip::from(&v)
            .and(&self.lower)
            .and(&self.upper)
            .map_collect(|&a, &l, &u| a.clamp(l, u))
    }

    pub(crate) fn project_block(&self, block: Range<usize>, v: ArrayView1<f64>) -> Array1<f64> {
        Zip::from(&v)
            .and(self.lower.slice(s![block.clone()]))
            .and(self.upper.slice(s![block]))
            .map_collect(|&a, &l, &u| a.clamp(l, u))
    }

    /// `max ||x||` over the box.
    pub fn radius(&self) -> f64 {
        self.lower
            .iter()
            .zip(self.upper.iter())
            .map(|(l, u)| {
                let m = l.abs().max(u.abs());
                m * m
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn restrict(&self, range: Range<usize>) -> BoxDomain {
        BoxDomain {
            lower: self.lower.slice(s![range.clone()]).to_owned(),
            upper: self.upper.slice(s![range]).to_owned(),
        }
    }

    fn strictly_inside(&self, i: usize, a: f64) -> bool {
        a > self.lower[i] && a < self.upper[i]
    }
}

/// A proper closed convex function with an inexpensive proximal mapping.
///
/// `prox(v, weight)` returns `argmin_u weight * h(u) + 1/2 ||u - v||^2`.
pub trait ProxFunction: Send + Sync + fmt::Debug {
    /// Dimension the term is tied to, `None` if it applies to any length.
    fn dim(&self) -> Option<usize>;

    /// Value, `+inf` outside the domain.
    fn value(&self, x: ArrayView1<f64>) -> f64;

    fn prox(&self, v: ArrayView1<f64>, weight: f64) -> Array1<f64>;

    /// Proximal map of the block term `h_i`; only called when
    /// [`ProxFunction::separable_over`] holds for the partition in use.
    fn prox_block(&self, block: Range<usize>, v: ArrayView1<f64>, weight: f64) -> Array1<f64>;

    fn separable_over(&self, partition: &BlockPartition) -> bool;

    fn domain(&self) -> Option<&BoxDomain> {
        None
    }

    /// True for set indicators, whose prox is a projection.
    fn is_indicator(&self) -> bool {
        false
    }

    /// Partial derivatives of `h` at `x` for coordinates where `h` is
    /// differentiable (interior of the domain and away from kinks).
    fn derivative_where_smooth(&self, x: ArrayView1<f64>) -> Vec<Option<f64>>;

    fn describe(&self) -> Option<ProxSpec> {
        None
    }
}

/// `h = 0`.
#[derive(Debug, Clone)]
pub struct ZeroProx {
    dim: usize,
}

impl ZeroProx {
    pub fn new(dim: usize) -> Self {
        Self { dim }
    }
}

impl ProxFunction for ZeroProx {
    fn dim(&self) -> Option<usize> {
        Some(self.dim)
    }

    fn value(&self, _x: ArrayView1<f64>) -> f64 {
        0.0
    }

    fn prox(&self, v: ArrayView1<f64>, _weight: f64) -> Array1<f64> {
        v.to_owned()
    }

    fn prox_block(&self, _block: Range<usize>, v: ArrayView1<f64>, _weight: f64) -> Array1<f64> {
        v.to_owned()
    }

    fn separable_over(&self, _partition: &BlockPartition) -> bool {
        true
    }

    fn is_indicator(&self) -> bool {
        // indicator of the whole space
        true
    }

    fn derivative_where_smooth(&self, x: ArrayView1<f64>) -> Vec<Option<f64>> {
        vec![Some(0.0); x.len()]
    }

    fn describe(&self) -> Option<ProxSpec> {
        Some(ProxSpec::Zero { dim: self.dim })
    }
}

/// Indicator of a box.
#[derive(Debug, Clone)]
pub struct BoxIndicator {
    domain: BoxDomain,
}

impl BoxIndicator {
    pub fn new(domain: BoxDomain) -> Self {
        Self { domain }
    }
}

impl ProxFunction for BoxIndicator {
    fn dim(&self) -> Option<usize> {
        Some(self.domain.dim())
    }

    fn value(&self, x: ArrayView1<f64>) -> f64 {
        if self.domain.contains(x) {
            0.0
        } else {
            f64::INFINITY
        }
    }

    fn prox(&self, v: ArrayView1<f64>, _weight: f64) -> Array1<f64> {
        self.domain.project(v)
    }

    fn prox_block(&self, block: Range<usize>, v: ArrayView1<f64>, _weight: f64) -> Array1<f64> {
        self.domain.project_block(block, v)
    }

    fn separable_over(&self, _partition: &BlockPartition) -> bool {
        true
    }

    fn domain(&self) -> Option<&BoxDomain> {
        Some(&self.domain)
    }

    fn is_indicator(&self) -> bool {
        true
    }

    fn derivative_where_smooth(&self, x: ArrayView1<f64>) -> Vec<Option<f64>> {
        x.iter()
            .enumerate()
            .map(|(i, &a)| self.domain.strictly_inside(i, a).then_some(0.0))
            .collect()
    }

    fn describe(&self) -> Option<ProxSpec> {
        Some(ProxSpec::Box {
            lower: bounds_to_doc(&self.domain.lower),
            upper: bounds_to_doc(&self.domain.upper),
        })
    }
}

/// `h(x) = scale * ||x||_1`, optionally restricted to a box.
#[derive(Debug, Clone)]
pub struct L1Norm {
    scale: f64,
    domain: Option<BoxDomain>,
}

impl L1Norm {
    pub fn new(scale: f64) -> Result<Self> {
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::InvalidParameter(format!("l1 scale {scale}")));
        }
        Ok(Self {
            scale,
            domain: None,
        })
    }

    pub fn with_box(mut self, domain: BoxDomain) -> Self {
        self.domain = Some(domain);
        self
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }
}

impl ProxFunction for L1Norm {
    fn dim(&self) -> Option<usize> {
        self.domain.as_ref().map(BoxDomain::dim)
    }

    fn value(&self, x: ArrayView1<f64>) -> f64 {
        if let Some(d) = &self.domain {
            if !d.contains(x) {
                return f64::INFINITY;
            }
        }
        self.scale * x.iter().map(|a| a.abs()).sum::<f64>()
    }

    fn prox(&self, v: ArrayView1<f64>, weight: f64) -> Array1<f64> {
        let tau = weight * self.scale;
        let p = v.mapv(|a| shrink(a, tau));
        match &self.domain {
            // separable 1-D convex problems: clamp of the unconstrained minimizer
            Some(d) => d.project(p.view()),
            None => p,
        }
    }

    fn prox_block(&self, block: Range<usize>, v: ArrayView1<f64>, weight: f64) -> Array1<f64> {
        let tau = weight * self.scale;
        let p = v.mapv(|a| shrink(a, tau));
        match &self.domain {
            Some(d) => d.project_block(block, p.view()),
            None => p,
        }
    }

    fn separable_over(&self, _partition: &BlockPartition) -> bool {
        true
    }

    fn domain(&self) -> Option<&BoxDomain> {
        self.domain.as_ref()
    }

    fn derivative_where_smooth(&self, x: ArrayView1<f64>) -> Vec<Option<f64>> {
        x.iter()
            .enumerate()
            .map(|(i, &a)| {
                let inside = self.domain.as_ref().is_none_or(|d| d.strictly_inside(i, a));
                (inside && a != 0.0).then(|| self.scale * a.signum())
            })
            .collect()
    }

    fn describe(&self) -> Option<ProxSpec> {
        Some(ProxSpec::L1 {
            scale: self.scale,
            lower: self.domain.as_ref().map(|d| bounds_to_doc(&d.lower)),
            upper: self.domain.as_ref().map(|d| bounds_to_doc(&d.upper)),
        })
    }
}

/// `h(x) = scale * ||x||_2`. Not separable across more than one block.
#[derive(Debug, Clone)]
pub struct L2Norm {
    scale: f64,
}

impl L2Norm {
    pub fn new(scale: f64) -> Result<Self> {
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::InvalidParameter(format!("l2 scale {scale}")));
        }
        Ok(Self { scale })
    }
}

impl ProxFunction for L2Norm {
    fn dim(&self) -> Option<usize> {
        None
    }

    fn value(&self, x: ArrayView1<f64>) -> f64 {
        self.scale * norm(x)
    }

    fn prox(&self, v: ArrayView1<f64>, weight: f64) -> Array1<f64> {
        let n = norm(v);
        let tau = weight * self.scale;
        if n <= tau {
            Array1::zeros(v.len())
        } else {
            v.to_owned() * ((n - tau) / n)
        }
    }

    fn prox_block(&self, _block: Range<usize>, v: ArrayView1<f64>, weight: f64) -> Array1<f64> {
        // only reached for single-block partitions
        self.prox(v, weight)
    }

    fn separable_over(&self, partition: &BlockPartition) -> bool {
        partition.len() == 1
    }

    fn derivative_where_smooth(&self, x: ArrayView1<f64>) -> Vec<Option<f64>> {
        let n = norm(x);
        x.iter()
            .map(|&a| (n > 0.0).then(|| self.scale * a / n))
            .collect()
    }
}

pub(crate) fn bounds_to_doc(v: &Array1<f64>) -> Vec<Option<f64>> {
    v.iter().map(|a| a.is_finite().then_some(*a)).collect()
}

pub(crate) fn bounds_from_doc(v: &[Option<f64>], fill: f64) -> Array1<f64> {
    v.iter().map(|a| a.unwrap_or(fill)).collect()
}
