//! Fixed problem instances shared by the benchmarks.

use lalm_core::instances::{gen_bpdn, gen_qcqp, BpdnSpec, QcqpSpec};
use lalm_core::{BlockPartition, ProblemInstance};
use ndarray::Array1;

/// QCQP with `p` variables, `m` constraints and `blocks` even blocks.
pub fn qcqp(p: usize, m: usize, blocks: usize) -> ProblemInstance {
    gen_qcqp(&QcqpSpec {
        m,
        p,
        seed: 0,
        ..QcqpSpec::default()
    })
    .and_then(|prob| prob.with_partition(BlockPartition::even(p, blocks)?))
    .expect("valid qcqp fixture")
}

/// The default BPDN instance split into `blocks` even blocks, with its
/// least-norm starting point.
pub fn bpdn(blocks: usize) -> (ProblemInstance, Array1<f64>) {
    let inst = gen_bpdn(&BpdnSpec::default()).expect("valid bpdn fixture");
    let x0 = inst.least_norm_start().expect("least-norm start");
    let dim = inst.problem.dim();
    let prob = inst
        .problem
        .with_partition(BlockPartition::even(dim, blocks).expect("partition"))
        .expect("separable regularizer");
    (prob, x0)
}
