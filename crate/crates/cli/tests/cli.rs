use std::fs;
use std::process::{Command, Output};

use tempfile::tempdir;

fn lalm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lalm"))
        .args(args)
        .env_remove("LALM_CACHE_DIR")
        .output()
        .unwrap()
}

const HEADER: &str = "method,epoch,obj,obj_gap,feas,kkt_stat,erg_obj_gap,erg_feas,eta_max,time_ms";

#[test]
fn solve_writes_csv_file() {
    let dir = tempdir().unwrap();
    let out = dir.path().join("trace.csv");
    let res = lalm(&[
        "solve",
        "--problem",
        "tiny:scalar-qcqp",
        "--method",
        "lalm",
        "--epochs",
        "1000",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    let text = fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(HEADER));
    assert_eq!(text.lines().count(), 1002);
    let last: Vec<&str> = text.lines().last().unwrap().split(',').collect();
    assert_eq!(last[0], "lalm");
    assert_eq!(last[1], "1000");
    assert!(last[3].parse::<f64>().unwrap() <= 1e-6);
}

#[test]
fn trace_goes_to_stdout_without_out() {
    let res = lalm(&[
        "solve",
        "--problem",
        "tiny:scalar-bpdn",
        "--epochs",
        "3",
        "--no-time",
    ]);
    assert!(res.status.success());
    let text = String::from_utf8(res.stdout).unwrap();
    assert_eq!(text.lines().next(), Some(HEADER));
    assert_eq!(text.lines().count(), 5);
    assert!(text.lines().skip(1).all(|l| l.ends_with(',')));
}

#[test]
fn block_method_is_deterministic() {
    let run = || {
        let res = lalm(&[
            "solve",
            "--problem",
            "bpdn",
            "--rows",
            "10",
            "--cols",
            "20",
            "--sparsity",
            "2",
            "--method",
            "blalm",
            "--blocks",
            "5",
            "--seed",
            "7",
            "--epochs",
            "200",
            "--no-time",
            "--reference",
            "off",
        ]);
        assert!(
            res.status.success(),
            "{}",
            String::from_utf8_lossy(&res.stderr)
        );
        res.stdout
    };
    assert_eq!(run(), run());
}

#[test]
fn flags_override_config_file() {
    let dir = tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(
        &cfg,
        r#"{"problem": "qcqp", "qcqp_m": 2, "qcqp_p": 6, "method": "pdyn", "epochs": 50, "record_every": 10, "no_time": true}"#,
    )
    .unwrap();
    let res = lalm(&["solve", "--config", cfg.to_str().unwrap(), "--epochs", "20"]);
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    let text = String::from_utf8(res.stdout).unwrap();
    let epochs: Vec<&str> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap())
        .collect();
    assert_eq!(epochs, ["0", "10", "20"]);
    assert!(text.lines().skip(1).all(|l| l.starts_with("pdyn,")));
}

#[test]
fn instance_files_round_trip() {
    let dir = tempdir().unwrap();
    let inst = dir.path().join("inst.json");
    let common = ["--epochs", "30", "--no-time", "--reference", "off"];
    let mut first = vec![
        "solve",
        "--problem",
        "qcqp",
        "--qcqp-m",
        "2",
        "--qcqp-p",
        "5",
    ];
    first.extend(common);
    first.extend(["--dump-instance", inst.to_str().unwrap()]);
    let a = lalm(&first);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    let mut second = vec!["solve", "--instance", inst.to_str().unwrap()];
    second.extend(common);
    let b = lalm(&second);
    assert!(b.status.success(), "{}", String::from_utf8_lossy(&b.stderr));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn errors_exit_nonzero() {
    for args in [
        vec![
            "solve",
            "--problem",
            "tiny:equality-qp",
            "--method",
            "pdyn",
            "--epochs",
            "5",
        ],
        vec!["solve", "--problem", "lasso"],
        vec!["solve", "--method", "newton"],
        vec!["solve", "--problem", "tiny:scalar-qcqp", "--epochs", "0"],
        vec!["solve", "--config", "/nonexistent/cfg.json"],
    ] {
        let res = lalm(&args);
        assert!(!res.status.success(), "{args:?}");
        assert!(!res.stderr.is_empty());
    }
}
