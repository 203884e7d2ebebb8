use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use lalm_core::blalm::BlockLalm;
use lalm_core::{Evaluation, Lalm, SolverConfig};
use ndarray::{s, Array1};

fn full_iteration(c: &mut Criterion) {
    let mut group = c.benchmark_group("lalm_step");
    for p in [200, 500] {
        let prob = lalm_bench::qcqp(p, 10, 10);
        let x0 = Array1::zeros(p);
        group.bench_with_input(BenchmarkId::new("qcqp", p), &p, |b, _| {
            let mut solver = Lalm::from_primal(&prob, SolverConfig::lalm(0.1), x0.clone()).unwrap();
            b.iter(|| black_box(solver.step().unwrap()));
        });
    }
    let (prob, x0) = lalm_bench::bpdn(10);
    group.bench_function("bpdn", |b| {
        let mut solver = Lalm::from_primal(&prob, SolverConfig::lalm(1.0), x0.clone()).unwrap();
        b.iter(|| black_box(solver.step().unwrap()));
    });
    group.finish();
}

fn block_iteration(c: &mut Criterion) {
    let mut group = c.benchmark_group("blalm_step");
    for p in [200, 500] {
        let prob = lalm_bench::qcqp(p, 10, 20);
        let x0 = Array1::zeros(p);
        group.bench_with_input(BenchmarkId::new("qcqp", p), &p, |b, _| {
            let cfg = SolverConfig::blalm(0.1, 20);
            let mut solver = BlockLalm::from_primal(&prob, cfg, x0.clone(), 0).unwrap();
            b.iter(|| black_box(solver.step().unwrap()));
        });
    }
    let (prob, x0) = lalm_bench::bpdn(10);
    group.bench_function("bpdn", |b| {
        let mut solver =
            BlockLalm::from_primal(&prob, SolverConfig::blalm(1.0, 10), x0.clone(), 0).unwrap();
        b.iter(|| black_box(solver.step().unwrap()));
    });
    group.finish();
}

fn gradients(c: &mut Criterion) {
    let (p, n) = (1000, 10);
    let prob = lalm_bench::qcqp(p, 10, n);
    let x = Array1::from_elem(p, 0.1);
    let z = Array1::from_elem(10, 0.5);
    let y = Array1::zeros(0);
    let eval = Evaluation::at(&prob, x.view());
    let block = prob.partition().unwrap().block(0);
    let delta = Array1::from_elem(block.len(), 1e-3);
    let mut moved = x.clone();
    moved.slice_mut(s![block.clone()]).scaled_add(1.0, &delta);

    let mut group = c.benchmark_group("gradient_qcqp_1000");
    group.bench_function("full", |b| {
        b.iter(|| {
            let ev = Evaluation::at(&prob, moved.view());
            black_box(ev.smooth_gradient(&prob, moved.view(), y.view(), z.view(), 0.1))
        })
    });
    group.bench_function("block", |b| {
        b.iter(|| {
            let ev = eval.shifted(&prob, moved.view(), block.clone(), delta.view());
            black_box(ev.smooth_partial(
                &prob,
                moved.view(),
                y.view(),
                z.view(),
                0.1,
                block.clone(),
            ))
        })
    });
    group.finish();
}

criterion_group!(benches, full_iteration, block_iteration, gradients);
criterion_main!(benches);
