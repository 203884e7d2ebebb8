use std::sync::Arc;

use approx::assert_abs_diff_eq;
use lalm_core::blalm::{self, block_x_update, BlockLalm, BlockSampler};
use lalm_core::instances::{gen_qcqp, tiny_reference, QcqpSpec, TinyKind};
use lalm_core::lalm::{self, eta_analytic, x_update};
use lalm_core::linalg::{norm, norm_sq};
use lalm_core::pdyn::{self, Pdyn, PdynConfig};
use lalm_core::solver::{y_update, ErgodicAccumulator, ErgodicMode};
use lalm_core::*;
use ndarray::{array, s, Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-1.0..1.0))
}

/// `min 1/2 ||x||^2 + c^T x  s.t.  Ax = b,  1/2 x^T Q x + q^T x - 1 <= 0,  x in [-5, 5]^n`.
fn mixed_instance(n: usize, blocks: usize, seed: u64) -> ProblemInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = random_matrix(&mut rng, 3, n);
    let b: Array1<f64> = (0..3).map(|_| rng.random_range(-0.5..0.5)).collect();
    let m = random_matrix(&mut rng, n, n);
    let q = m.t().dot(&m) / n as f64;
    let c: Array1<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let qc: Array1<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let domain = BoxDomain::uniform(n, -5.0, 5.0).unwrap();
    let g = Quadratic::new(Array2::eye(n), c, 0.0).unwrap();
    let f = Quadratic::new(q, qc, -1.0).unwrap();
    ProblemInstance::builder(Arc::new(g), Arc::new(BoxIndicator::new(domain.clone())))
        .affine(AffineConstraint::new(Arc::new(DenseOperator::new(a)), b).unwrap())
        .constraint(InequalityConstraint::new(Arc::new(f)).with_derived_bound(&domain))
        .partition(BlockPartition::even(n, blocks).unwrap())
        .build()
        .unwrap()
}

fn scalar_quadratic(l: f64) -> ProblemInstance {
    let g = Quadratic::new(array![[l]], array![0.0], 0.0).unwrap();
    ProblemInstance::builder(Arc::new(g), Arc::new(ZeroProx::new(1)))
        .build()
        .unwrap()
}

#[test]
fn x_update_examples() {
    let (prob, _) = tiny_reference(TinyKind::EqualityQp).unwrap();
    let x = x_update(
        array![1.0, 2.0].view(),
        array![4.0, -2.0].view(),
        2.0,
        &prob,
    );
    assert_eq!(x, array![-1.0, 3.0]);

    let l1 = lalm_core::instances::bpdn_from_data(array![[1.0]], array![2.0], 1.0, None).unwrap();
    let x = x_update(array![1.0].view(), array![2.0].view(), 4.0, &l1.problem);
    assert_abs_diff_eq!(x[0], 0.25, epsilon = 1e-15);

    let (qcqp, _) = tiny_reference(TinyKind::ScalarQcqp).unwrap();
    let x = x_update(array![9.0].view(), array![-3.0].view(), 1.0, &qcqp);
    assert_eq!(x[0], 10.0);
}

#[test]
fn analytic_eta_examples() {
    let prob = scalar_quadratic(5.0);
    let cfg = SolverConfig {
        delta: 1.0,
        ..SolverConfig::lalm(1.0)
    };
    let none = Array1::zeros(0);
    assert_eq!(
        eta_analytic(0.0, none.view(), none.view(), &cfg, &prob).unwrap(),
        6.0
    );
    let cfg = SolverConfig { delta: 2.0, ..cfg };
    assert_eq!(
        eta_analytic(10.0, none.view(), none.view(), &cfg, &prob).unwrap(),
        10.0
    );

    let analytic = SolverConfig {
        step: StepMode::Analytic,
        ..SolverConfig::lalm(1.0)
    };
    let mut s = Lalm::from_primal(&prob, analytic, array![3.0]).unwrap();
    let first = s.step().unwrap().eta;
    for _ in 0..20 {
        assert_eq!(s.step().unwrap().eta, first);
    }
}

#[test]
fn analytic_mode_needs_constants() {
    let inst = lalm_core::instances::bpdn_from_data(array![[1.0]], array![2.0], 1.0, None).unwrap();
    let cfg = SolverConfig {
        step: StepMode::Analytic,
        ..SolverConfig::lalm(1.0)
    };
    let err = Lalm::from_primal(&inst.problem, cfg, array![0.0]).unwrap_err();
    assert!(matches!(err, Error::MissingConstants(_)));
}

#[test]
fn backtracking_on_scalar_quadratic() {
    let prob = scalar_quadratic(3.0);
    let cfg = SolverConfig {
        eta0: Some(1.0),
        ..SolverConfig::lalm(1.0)
    };
    let mut s = Lalm::from_primal(&prob, cfg, array![2.0]).unwrap();
    let info = s.step().unwrap();
    assert_eq!(info.backtracks, 3);
    assert_eq!(info.eta, 3.375);
    let info = s.step().unwrap();
    assert_eq!(info.backtracks, 0);
    assert_eq!(info.eta, 3.375);
}

#[test]
fn no_backtracks_once_eta_dominates_the_lipschitz_estimate() {
    let prob = mixed_instance(8, 1, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..50 {
        let x: Array1<f64> = (0..8).map(|_| rng.random_range(-5.0..5.0)).collect();
        let y: Array1<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let z = array![rng.random_range(0.0..2.0)];
        let beta = 1.0;
        let lf = lalm_core::auglag::smooth_lipschitz(x.view(), z.view(), beta, &prob).unwrap();
        let cfg = SolverConfig {
            eta0: Some(lf),
            ..SolverConfig::lalm(beta)
        };
        let mut s = Lalm::new(&prob, cfg, x, y, z).unwrap();
        let info = s.step().unwrap();
        assert_eq!(info.backtracks, 0);
        assert!(info.descent_margin <= 1e-10, "{}", info.descent_margin);
    }
}

#[test]
fn y_update_examples() {
    assert_eq!(
        y_update(array![1.0].view(), array![0.0].view(), 0.7),
        array![1.0]
    );
    assert_eq!(
        y_update(array![0.0, 0.0].view(), array![2.0, -1.0].view(), 1.0),
        array![2.0, -1.0]
    );
    assert_eq!(
        y_update(Array1::zeros(0).view(), Array1::zeros(0).view(), 1.0).len(),
        0
    );
}

#[test]
fn ergodic_examples() {
    let mut acc = ErgodicAccumulator::new(ErgodicMode::Weighted, 1);
    assert!(acc.point().is_err());
    acc.push(array![2.0].view(), 1.0);
    assert_eq!(acc.point().unwrap(), array![2.0]);
    acc.push(array![4.0].view(), 2.0);
    assert_abs_diff_eq!(acc.point().unwrap()[0], 8.0 / 3.0, epsilon = 1e-15);

    let mut acc = ErgodicAccumulator::new(ErgodicMode::Weighted, 1);
    for v in [1.0, 2.0, 6.0] {
        acc.push(array![v].view(), 5.0);
    }
    assert_abs_diff_eq!(acc.point().unwrap()[0], 3.0, epsilon = 1e-15);
}

#[test]
fn lalm_reaches_hand_solutions() {
    for kind in TinyKind::ALL {
        let (prob, sol) = tiny_reference(kind).unwrap();
        let mut cfg = SolverConfig::lalm(1.0);
        cfg.max_epochs = 10_000;
        cfg.stop = StopRule::KktMax;
        cfg.tol = 1e-10;
        let out = lalm::solve(
            &prob,
            &cfg,
            Array1::zeros(prob.dim()),
            Array1::zeros(prob.num_eq()),
            Array1::zeros(prob.num_ineq()),
        )
        .unwrap();
        assert!(out.converged, "{kind}");
        let err = norm((&out.point.x - &Array1::from(sol.x.clone())).view());
        assert!(err <= 1e-6, "{kind}: {err}");
        assert_abs_diff_eq!(
            prob.objective_value(out.point.x.view()),
            sol.f0,
            epsilon = 1e-6
        );
        if kind == TinyKind::ScalarQcqp {
            assert_abs_diff_eq!(out.point.z[0], 0.5, epsilon = 1e-6);
        }
    }
}

#[test]
fn eta_is_monotone_and_steps_satisfy_descent() {
    let prob = mixed_instance(10, 1, 2);
    let mut s =
        Lalm::from_primal(&prob, SolverConfig::lalm(0.5), Array1::from_elem(10, 4.0)).unwrap();
    let mut prev = 0.0;
    for _ in 0..500 {
        let info = s.step().unwrap();
        assert!(info.eta >= prev);
        assert!(info.descent_margin <= 1e-10, "{}", info.descent_margin);
        prev = info.eta;
    }
}

#[test]
fn diverging_objective_is_reported_with_trace() {
    let g = FnSmooth::new(1, |x| (-x[0]).exp(), |x| array![-(-x[0]).exp()]);
    let prob = ProblemInstance::builder(Arc::new(g), Arc::new(ZeroProx::new(1)))
        .build()
        .unwrap();
    let mut cfg = SolverConfig::lalm(1.0);
    cfg.max_epochs = 100_000;
    cfg.stop = StopRule::Budget;
    let res = lalm::solve(
        &prob,
        &cfg,
        array![-800.0],
        Array1::zeros(0),
        Array1::zeros(0),
    );
    match res {
        Err(Error::Diverged { trace, .. }) => assert!(!trace.is_empty()),
        other => panic!("expected divergence, got {other:?}"),
    }
}

#[test]
fn block_step_changes_exactly_one_block() {
    let prob = mixed_instance(12, 4, 3);
    let mut s = BlockLalm::from_primal(
        &prob,
        SolverConfig::blalm(1.0, 4),
        Array1::from_elem(12, 1.0),
        5,
    )
    .unwrap();
    let part = prob.partition().unwrap().clone();
    for _ in 0..200 {
        let before = s.x().clone();
        let (i, _) = s.step().unwrap();
        for j in 0..part.len() {
            if j != i {
                let r = part.block(j);
                assert_eq!(before.slice(s![r.clone()]), s.x().slice(s![r]));
            }
        }
    }
}

#[test]
fn maintained_caches_track_full_recomputation() {
    let prob = mixed_instance(12, 6, 4);
    let mut s = BlockLalm::from_primal(
        &prob,
        SolverConfig::blalm(1.0, 6),
        Array1::from_elem(12, 2.0),
        1,
    )
    .unwrap();
    for k in 0..10_000 {
        s.step().unwrap();
        if k % 97 == 0 {
            assert!(
                s.evaluation().consistent_with(&prob, s.x().view(), 1e-9),
                "iteration {k}"
            );
        }
    }
    assert!(s.evaluation().consistent_with(&prob, s.x().view(), 1e-9));
}

#[test]
fn block_update_matches_restricted_full_update() {
    let prob = mixed_instance(12, 3, 5);
    let part = prob.partition().unwrap().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..20 {
        let x: Array1<f64> = (0..12).map(|_| rng.random_range(-6.0..6.0)).collect();
        let grad: Array1<f64> = (0..12).map(|_| rng.random_range(-3.0..3.0)).collect();
        let eta = rng.random_range(0.5..4.0);
        let full = x_update(x.view(), grad.view(), eta, &prob);
        for i in 0..part.len() {
            let r = part.block(i);
            let xb = block_x_update(
                &prob,
                r.clone(),
                x.slice(s![r.clone()]),
                grad.slice(s![r.clone()]),
                eta,
            );
            let diff = norm((&xb - &full.slice(s![r])).view());
            assert!(diff <= 1e-12);
        }
    }
    let zero = block_x_update(
        &prob,
        0..4,
        array![1.0, 2.0, 3.0, 4.0].view(),
        Array1::zeros(4).view(),
        2.0,
    );
    assert_eq!(zero, array![1.0, 2.0, 3.0, 4.0]);
}

#[test]
fn block_backtracking_count_on_separable_quadratic() {
    let curv = array![1.0, 8.0, 40.0];
    let g = Quadratic::new(Array2::from_diag(&curv), Array1::zeros(3), 0.0).unwrap();
    let prob = ProblemInstance::builder(Arc::new(g), Arc::new(ZeroProx::new(3)))
        .partition(BlockPartition::even(3, 3).unwrap())
        .build()
        .unwrap();
    let cfg = SolverConfig {
        eta0: Some(1.0),
        ..SolverConfig::blalm(1.0, 3)
    };
    let mut s = BlockLalm::from_primal(&prob, cfg, array![1.0, 1.0, 1.0], 0).unwrap();
    for (i, l) in curv.iter().enumerate() {
        let info = s.step_block(i).unwrap();
        let expected = (l.ln() / 1.5f64.ln() - 1e-12).ceil().max(0.0) as usize;
        assert_eq!(info.backtracks, expected, "block {i}");
        assert!(info.eta >= *l && info.eta / 1.5 < *l || *l <= 1.0);
        assert_eq!(s.step_block(i).unwrap().backtracks, 0);
    }
}

#[test]
fn analytic_block_steps_never_violate_descent() {
    let prob = gen_qcqp(&QcqpSpec {
        m: 3,
        p: 30,
        seed: 2,
        ..QcqpSpec::default()
    })
    .unwrap()
    .with_partition(BlockPartition::even(30, 5).unwrap())
    .unwrap();
    let cfg = SolverConfig {
        step: StepMode::Analytic,
        ..SolverConfig::blalm(0.5, 5)
    };
    let mut s = BlockLalm::from_primal(&prob, cfg, Array1::from_elem(30, 3.0), 8).unwrap();
    for _ in 0..2000 {
        let (_, info) = s.step().unwrap();
        assert!(
            info.descent_margin <= 1e-10 * (1.0 + info.eta),
            "{}",
            info.descent_margin
        );
    }
}

#[test]
fn single_and_coordinate_blocks_reach_the_scalar_solution() {
    let (prob, _) = tiny_reference(TinyKind::ScalarQcqp).unwrap();
    for n in [1, prob.dim()] {
        let p = prob
            .with_partition(BlockPartition::even(prob.dim(), n).unwrap())
            .unwrap();
        let mut cfg = SolverConfig::blalm(1.0, n);
        cfg.max_epochs = 10_000;
        cfg.stop = StopRule::KktMax;
        cfg.tol = 1e-9;
        let out =
            blalm::solve(&p, &cfg, array![5.0], Array1::zeros(0), Array1::zeros(1), 3).unwrap();
        assert_abs_diff_eq!(out.point.x[0], -1.0, epsilon = 1e-5);
    }
}

#[test]
fn block_runs_are_seed_deterministic() {
    let prob = mixed_instance(12, 4, 7);
    let run = |seed| {
        let mut cfg = SolverConfig::blalm(1.0, 4);
        cfg.max_epochs = 200;
        cfg.stop = StopRule::Budget;
        cfg.timing = false;
        let out = blalm::solve(
            &prob,
            &cfg,
            Array1::zeros(12),
            Array1::zeros(3),
            Array1::zeros(1),
            seed,
        )
        .unwrap();
        out.trace.to_csv_string().unwrap()
    };
    assert_eq!(run(7), run(7));
    assert_ne!(run(7), run(8));
}

#[test]
fn sampler_edge_cases() {
    let mut one = BlockSampler::new(1, 42);
    assert!((0..100).all(|_| one.pick_block() == 0));
    let mut a = BlockSampler::new(10, 9);
    let mut b = BlockSampler::new(10, 9);
    let mut counts = [0usize; 10];
    for _ in 0..100_000 {
        let i = a.pick_block();
        assert_eq!(i, b.pick_block());
        counts[i] += 1;
    }
    assert!(
        counts.iter().all(|&c| (9_000..=11_000).contains(&c)),
        "{counts:?}"
    );
}

#[test]
fn block_method_rejects_bad_setups() {
    let prob = mixed_instance(6, 1, 9);
    let no_part =
        ProblemInstance::builder(prob.objective_arc().clone(), prob.regularizer_arc().clone())
            .build()
            .unwrap();
    let err = BlockLalm::from_primal(&no_part, SolverConfig::blalm(1.0, 1), Array1::zeros(6), 0)
        .unwrap_err();
    assert!(matches!(err, Error::MissingPartition));
    let l2 = ProblemInstance::builder(
        Arc::new(ZeroFunction::new(4)),
        Arc::new(L2Norm::new(1.0).unwrap()),
    )
    .partition(BlockPartition::even(4, 2).unwrap())
    .build()
    .unwrap();
    let err =
        BlockLalm::from_primal(&l2, SolverConfig::blalm(1.0, 2), Array1::zeros(4), 0).unwrap_err();
    assert!(matches!(err, Error::NonSeparable));
}

#[test]
fn theory_defaults() {
    let cfg = SolverConfig::blalm_theory(1.0, 10);
    assert_eq!(cfg.rho_y, 0.1);
    assert_eq!(cfg.rho_z, 0.05);
    let cfg = SolverConfig::blalm(1.0, 10);
    assert_eq!(cfg.rho_z, 0.1);
}

fn one_constraint_problem() -> ProblemInstance {
    let domain = BoxDomain::uniform(1, -10.0, 10.0).unwrap();
    let g = Quadratic::new(array![[1.0]], array![-3.0], 0.0).unwrap();
    let f = Linear::new(array![1.0], -1.0);
    ProblemInstance::builder(Arc::new(g), Arc::new(BoxIndicator::new(domain.clone())))
        .constraint(InequalityConstraint::new(Arc::new(f)).with_derived_bound(&domain))
        .build()
        .unwrap()
}

#[test]
fn pdyn_queue_example() {
    let prob = one_constraint_problem();
    let mut s = Pdyn::new(
        &prob,
        PdynConfig::from_solver(&SolverConfig::lalm(1.0)),
        array![0.0],
    )
    .unwrap();
    assert_eq!(s.lambda()[0], 1.0);
    s.step().unwrap();
    assert_eq!(s.lambda()[0], 1.0);
}

#[test]
fn pdyn_direction_is_gradient_of_phi() {
    let prob = mixed_pdyn();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x: Array1<f64> = (0..6).map(|_| rng.random_range(-2.0..2.0)).collect();
    let s = Pdyn::new(
        &prob,
        PdynConfig::from_solver(&SolverConfig::lalm(1.0)),
        x.clone(),
    )
    .unwrap();
    let z = s.virtual_multipliers();
    let mut expected = prob.objective().gradient(x.view());
    for (j, c) in prob.constraints().iter().enumerate() {
        expected.scaled_add(z[j], &c.func.gradient(x.view()));
    }
    assert!(norm((&s.direction() - &expected).view()) <= 1e-12);
}

fn mixed_pdyn() -> ProblemInstance {
    gen_qcqp(&QcqpSpec {
        m: 2,
        p: 6,
        seed: 1,
        ..QcqpSpec::default()
    })
    .unwrap()
}

#[test]
fn pdyn_backtracking_accepts_at_curvature() {
    let domain = BoxDomain::uniform(1, -10.0, 10.0).unwrap();
    let g = Quadratic::new(array![[4.0]], array![0.0], 0.0).unwrap();
    let prob = ProblemInstance::builder(Arc::new(g), Arc::new(BoxIndicator::new(domain)))
        .build()
        .unwrap();
    let cfg = PdynConfig {
        eta0: Some(1.0),
        ..PdynConfig::from_solver(&SolverConfig::lalm(1.0))
    };
    let mut s = Pdyn::new(&prob, cfg, array![3.0]).unwrap();
    assert_eq!(s.step().unwrap(), 4);
    assert_eq!(s.eta(), 1.5f64.powi(4));
    assert_eq!(s.step().unwrap(), 0);
}

#[test]
fn pdyn_without_constraints_is_projected_gradient() {
    let domain = BoxDomain::uniform(1, -2.0, 10.0).unwrap();
    let g = Quadratic::new(array![[1.0]], array![3.0], 0.0).unwrap();
    let prob = ProblemInstance::builder(Arc::new(g), Arc::new(BoxIndicator::new(domain)))
        .build()
        .unwrap();
    let cfg = PdynConfig {
        adaptive: false,
        eta0: Some(4.0),
        ..PdynConfig::from_solver(&SolverConfig::lalm(1.0))
    };
    let mut s = Pdyn::new(&prob, cfg, array![2.0]).unwrap();
    let mut x = 2.0f64;
    for _ in 0..30 {
        s.step().unwrap();
        x = (x - (x + 3.0) / 4.0).clamp(-2.0, 10.0);
        assert_abs_diff_eq!(s.x()[0], x, epsilon = 1e-12);
    }
    assert_eq!(s.x()[0], -2.0);
}

#[test]
fn pdyn_queue_law_and_monotone_step() {
    let prob = mixed_pdyn();
    let mut s = Pdyn::new(
        &prob,
        PdynConfig::from_solver(&SolverConfig::lalm(1.0)),
        Array1::from_elem(6, 5.0),
    )
    .unwrap();
    let mut eta = s.eta();
    for _ in 0..300 {
        let lambda = s.lambda().clone();
        let f = prob.constraint_values(s.x().view());
        s.step().unwrap();
        for j in 0..lambda.len() {
            let new = s.lambda()[j];
            assert!(new >= -f[j] && new >= lambda[j] + f[j]);
            assert!(new == -f[j] || new == lambda[j] + f[j]);
        }
        assert!(s.eta() >= eta);
        eta = s.eta();
    }
}

#[test]
fn pdyn_feasibility_on_scalar_qcqp() {
    let (prob, _) = tiny_reference(TinyKind::ScalarQcqp).unwrap();
    let mut cfg = PdynConfig::from_solver(&SolverConfig::lalm(1.0));
    cfg.max_epochs = 100_000;
    cfg.stop = StopRule::Budget;
    cfg.timing = false;
    let out = pdyn::solve(&prob, &cfg, array![5.0]).unwrap();
    let feas = out.trace.last().unwrap().feas;
    assert!(feas <= 1e-4, "{feas}");
    let again = pdyn::solve(&prob, &cfg, array![5.0]).unwrap();
    assert_eq!(
        out.trace.to_csv_string().unwrap(),
        again.trace.to_csv_string().unwrap()
    );
}

#[test]
fn pdyn_rejects_equality_constraints() {
    let (prob, _) = tiny_reference(TinyKind::EqualityQp).unwrap();
    let err = Pdyn::new(
        &prob,
        PdynConfig::from_solver(&SolverConfig::lalm(1.0)),
        Array1::zeros(2),
    )
    .unwrap_err();
    assert!(matches!(err, Error::Incompatible(_)));
}

#[test]
fn fejer_energy_decreases_on_mixed_instance() {
    let prob = mixed_instance(6, 1, 11);
    let mut cfg = SolverConfig::lalm(1.0);
    cfg.max_epochs = 20_000;
    cfg.stop = StopRule::KktMax;
    cfg.tol = 1e-11;
    let star = lalm::solve(
        &prob,
        &cfg,
        Array1::zeros(6),
        Array1::zeros(3),
        Array1::zeros(1),
    )
    .unwrap();
    assert!(star.converged);
    let w = star.point;
    let cfg = SolverConfig {
        step: StepMode::Analytic,
        rho_y: 0.5,
        rho_z: 0.5,
        delta: 0.1,
        ..SolverConfig::lalm(1.0)
    };
    let mut s = Lalm::from_primal(&prob, cfg, Array1::from_elem(6, -3.0)).unwrap();
    let energy = |x: &Array1<f64>, y: &Array1<f64>, z: &Array1<f64>, eta: f64| {
        0.5 * eta * norm_sq((x - &w.x).view())
            + norm_sq((y - &w.y).view())
            + norm_sq((z - &w.z).view())
    };
    let mut scale = None;
    for _ in 0..300 {
        let (x, y, z) = (s.x().clone(), s.y().clone(), s.z().clone());
        let eta = s.step().unwrap().eta;
        let before = energy(&x, &y, &z, eta);
        let scale = *scale.get_or_insert(before);
        assert!(energy(s.x(), s.y(), s.z(), eta) <= before + 1e-8 * scale);
    }
}
