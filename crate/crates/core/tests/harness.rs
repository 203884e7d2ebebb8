use std::fs;

use lalm_core::harness::{
    self, long_run_reference, long_run_reference_with, rate_fit, rate_fit_points, ExperimentConfig,
    ReferenceMode,
};
use lalm_core::instances::{gen_bpdn, tiny_reference, BpdnSpec, Provenance, TinyKind};
use lalm_core::*;
use tempfile::tempdir;

fn small_bpdn_config(method: Method) -> ExperimentConfig {
    ExperimentConfig {
        problem: "bpdn".into(),
        method,
        rows: 10,
        cols: 20,
        sparsity: 3,
        blocks: 4,
        epochs: 300,
        reference: ReferenceMode::Off,
        ..ExperimentConfig::default()
    }
}

#[test]
fn full_method_solves_tiny_instance() {
    let cfg = ExperimentConfig {
        problem: "tiny:scalar-qcqp".into(),
        epochs: 1000,
        ..ExperimentConfig::default()
    };
    let out = harness::run(&cfg).unwrap();
    let gap = out.output.trace.last().unwrap().obj_gap.unwrap();
    assert!(gap.abs() <= 1e-6, "{gap}");
    assert_eq!(out.reference.unwrap().provenance, Provenance::Hand);
}

#[test]
fn block_runs_are_reproducible_byte_for_byte() {
    let dir = tempdir().unwrap();
    let mut cfg = small_bpdn_config(Method::Blalm);
    cfg.seed = 7;
    cfg.no_time = true;
    let mut files = Vec::new();
    for name in ["a.csv", "b.csv"] {
        cfg.out = Some(dir.path().join(name));
        harness::run(&cfg).unwrap();
        files.push(fs::read(dir.path().join(name)).unwrap());
    }
    assert_eq!(files[0], files[1]);
    cfg.seed = 8;
    cfg.out = Some(dir.path().join("c.csv"));
    harness::run(&cfg).unwrap();
    assert_ne!(files[0], fs::read(dir.path().join("c.csv")).unwrap());
}

#[test]
fn baseline_rejects_equality_constraints() {
    let cfg = ExperimentConfig {
        problem: "tiny:equality-qp".into(),
        method: Method::Pdyn,
        epochs: 10,
        ..ExperimentConfig::default()
    };
    assert!(harness::run(&cfg).is_err());
}

#[test]
fn record_interval_sets_row_count() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("nested/trace.csv");
    for method in [Method::Lalm, Method::Blalm, Method::Pdyn] {
        let mut cfg = ExperimentConfig {
            problem: "qcqp".into(),
            qcqp_m: 2,
            qcqp_p: 8,
            ..small_bpdn_config(method)
        };
        cfg.epochs = 100;
        cfg.record_every = Some(7);
        cfg.out = Some(path.clone());
        harness::run(&cfg).unwrap();
        let trace = Trace::read_csv(fs::File::open(&path).unwrap()).unwrap();
        assert_eq!(trace.len(), 100 / 7 + 1, "{method}");
        let epochs: Vec<usize> = trace.records.iter().map(|r| r.epoch).collect();
        assert_eq!(epochs, (0..=14).map(|i| 7 * i).collect::<Vec<_>>());
        assert!(trace.records.iter().all(|r| r.method == method));
    }
}

#[test]
fn trace_without_reference_has_no_gap() {
    let out = harness::run(&small_bpdn_config(Method::Lalm)).unwrap();
    let trace = &out.output.trace;
    assert!(trace
        .records
        .iter()
        .all(|r| r.obj_gap.is_none() && r.erg_obj_gap.is_none()));
    assert!(trace
        .records
        .iter()
        .all(|r| r.feas >= 0.0 && r.kkt_stat >= 0.0));
    assert!(trace.records[0].erg_feas.is_none());
    assert!(trace.records[1..]
        .iter()
        .all(|r| r.erg_feas.is_some_and(|v| v >= 0.0)));
    assert!(rate_fit(trace, "obj_gap", 1, 300).is_err());
}

#[test]
fn config_file_and_instance_file_round_trip() {
    let dir = tempdir().unwrap();
    let mut cfg = small_bpdn_config(Method::Lalm);
    cfg.no_time = true;
    cfg.epochs = 50;
    cfg.dump_instance = Some(dir.path().join("inst.json"));
    cfg.out = Some(dir.path().join("gen.csv"));
    let cfg_path = dir.path().join("cfg.json");
    fs::write(&cfg_path, serde_json::to_string(&cfg).unwrap()).unwrap();
    let loaded = ExperimentConfig::from_json_file(&cfg_path).unwrap();
    assert_eq!(loaded, cfg);
    harness::run(&loaded).unwrap();

    let from_file = ExperimentConfig {
        instance: Some(dir.path().join("inst.json")),
        dump_instance: None,
        out: Some(dir.path().join("file.csv")),
        ..cfg
    };
    let a = harness::run(&from_file).unwrap();
    let prob = gen_bpdn(&BpdnSpec {
        rows: 10,
        cols: 20,
        sparsity: 3,
        ..BpdnSpec::default()
    })
    .unwrap()
    .problem;
    let x = a.output.point.x.view();
    assert_eq!(a.problem.objective_value(x), prob.objective_value(x));
    assert_eq!(a.problem.constraint_values(x), prob.constraint_values(x));
}

#[test]
fn unknown_keys_and_names_are_errors() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("cfg.json");
    fs::write(&path, r#"{"problem": "bpdn", "betta": 2.0}"#).unwrap();
    assert!(ExperimentConfig::from_json_file(&path).is_err());
    let cfg = ExperimentConfig {
        problem: "lasso".into(),
        ..ExperimentConfig::default()
    };
    assert!(harness::run(&cfg).is_err());
    let cfg = ExperimentConfig {
        epochs: 0,
        ..small_bpdn_config(Method::Lalm)
    };
    assert!(harness::run(&cfg).is_err());
}

#[test]
fn slope_fit_recovers_power_laws() {
    let pts: Vec<(f64, f64)> = (1..=20)
        .map(|k| (k as f64 * 10.0, 5.0 / (k as f64 * 10.0)))
        .collect();
    assert!((rate_fit_points(&pts).unwrap() + 1.0).abs() <= 1e-12);
    let flat: Vec<(f64, f64)> = (1..=20).map(|k| (k as f64, 0.25)).collect();
    assert_eq!(rate_fit_points(&flat).unwrap(), 0.0);
    let geometric = |lo: usize| -> f64 {
        let pts: Vec<(f64, f64)> = (lo..lo + 20)
            .map(|k| (k as f64, 3.0 * 0.9f64.powi(k as i32)))
            .collect();
        rate_fit_points(&pts).unwrap()
    };
    assert!(geometric(20) < -1.0);
    assert!(geometric(60) < geometric(40) && geometric(40) < geometric(20));
    let pts: Vec<(f64, f64)> = (1..=20)
        .map(|k| (k as f64, (k as f64).powf(-2.0)))
        .collect();
    assert!((rate_fit_points(&pts).unwrap() + 2.0).abs() <= 1e-12);
    let mut few = pts[..9].to_vec();
    assert!(matches!(
        rate_fit_points(&few),
        Err(Error::InsufficientSamples(9))
    ));
    few.extend([(50.0, 0.0), (60.0, -1.0), (0.0, 1.0)]);
    assert!(rate_fit_points(&few).is_err());
}

#[test]
fn long_run_reference_matches_hand_solution() {
    for kind in [
        TinyKind::ScalarQcqp,
        TinyKind::ScalarBpdn,
        TinyKind::EqualityQp,
    ] {
        let (prob, sol) = tiny_reference(kind).unwrap();
        let reference = long_run_reference(&prob, 1_000_000, None).unwrap();
        assert_eq!(reference.provenance, Provenance::LongRun);
        assert!(
            (reference.f0 - sol.f0).abs() <= 1e-8,
            "{kind}: {} vs {}",
            reference.f0,
            sol.f0
        );
        assert!(reference.kkt.unwrap() <= 1e-10);
    }
}

#[test]
fn long_run_reference_uses_cache() {
    let dir = tempdir().unwrap();
    let (prob, _) = tiny_reference(TinyKind::ScalarQcqp).unwrap();
    let first = long_run_reference(&prob, 1_000_000, Some(dir.path())).unwrap();
    let files: Vec<_> = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    assert_eq!(files.len(), 1);
    let mut stored: instances::ReferenceSolution =
        serde_json::from_str(&fs::read_to_string(&files[0]).unwrap()).unwrap();
    assert_eq!(stored, first);
    stored.f0 = 123.0;
    fs::write(&files[0], serde_json::to_string(&stored).unwrap()).unwrap();
    let second = long_run_reference(&prob, 1_000_000, Some(dir.path())).unwrap();
    assert_eq!(second.f0, 123.0);
}

#[test]
fn long_run_reference_is_insensitive_to_initial_step() {
    let prob = gen_bpdn(&BpdnSpec::default()).unwrap().problem;
    let a = long_run_reference_with(&prob, 1_000_000, None, None).unwrap();
    let b = long_run_reference_with(&prob, 1_000_000, None, Some(5000.0)).unwrap();
    assert!((a.f0 - b.f0).abs() <= 1e-7, "{} vs {}", a.f0, b.f0);
}
