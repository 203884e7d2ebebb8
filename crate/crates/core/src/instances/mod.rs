//! Problem generators, the minimax reformulation and small reference
//! instances with known solutions.

mod bpdn;
mod brute;
mod minimax;
mod qcqp;
mod tiny;

use ndarray::Array1;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

pub use bpdn::{bpdn_from_data, gen_bpdn, BpdnInstance, BpdnSpec, DeltaPolicy};
pub use brute::{brute_force_reference, DEFAULT_SEARCH_RADIUS};
pub use minimax::{gen_minimax, minimax_reformulate, MinimaxInstance, MinimaxSpec};
pub use qcqp::{gen_qcqp, qcqp_from_data, QcqpSpec};
pub use tiny::{tiny_reference, TinyKind};

use crate::error::Result;
use crate::model::{kkt_residual, PrimalDualPoint, ProblemInstance};

/// Where a reference solution came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Hand,
    BruteForce,
    LongRun,
}

/// A KKT point `(x*, y*, z*)` with its objective value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSolution {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub f0: f64,
    pub provenance: Provenance,
    /// Largest KKT residual component at the stored point.
    pub kkt: Option<f64>,
}

impl ReferenceSolution {
    pub fn point(&self, prob: &ProblemInstance) -> Result<PrimalDualPoint> {
        PrimalDualPoint::new(
            prob,
            Array1::from(self.x.clone()),
            Array1::from(self.y.clone()),
            Array1::from(self.z.clone()),
        )
    }

    /// Recomputes and stores the KKT residual; returns it.
    pub fn verify(&mut self, prob: &ProblemInstance) -> Result<f64> {
        let r = kkt_residual(&self.point(prob)?, prob)?.max();
        self.kkt = Some(r);
        Ok(r)
    }
}

pub(crate) fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> Array1<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

pub(crate) fn gaussian_matrix(
    rng: &mut ChaCha8Rng,
    rows: usize,
    cols: usize,
) -> ndarray::Array2<f64> {
    ndarray::Array2::from_shape_simple_fn((rows, cols), || StandardNormal.sample(rng))
}
