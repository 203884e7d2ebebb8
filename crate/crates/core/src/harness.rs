//! Experiment driver: builds an instance, resolves a reference solution,
//! runs a method and writes the trace.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instances::{
    brute_force_reference, gen_bpdn, gen_minimax, gen_qcqp, tiny_reference, BpdnSpec, MinimaxSpec,
    Provenance, QcqpSpec, ReferenceSolution, TinyKind,
};
use crate::lalm::Lalm;
use crate::model::{kkt_residual, BlockPartition, InstanceDocument, ProblemInstance};
use crate::pdyn::PdynConfig;
use crate::solver::{SolveOutput, SolverConfig, StepMode, StopRule};
use crate::trace::{Method, RecordSchedule, Trace};
use crate::{blalm, lalm, pdyn};

/// Environment variable naming the reference-solution cache directory.
pub const CACHE_ENV: &str = "LALM_CACHE_DIR";

/// KKT target of [`long_run_reference`].
pub const LONG_RUN_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    Bpdn,
    Qcqp,
    Minimax,
    Tiny(TinyKind),
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProblemKind::Bpdn => f.write_str("bpdn"),
            ProblemKind::Qcqp => f.write_str("qcqp"),
            ProblemKind::Minimax => f.write_str("minimax"),
            ProblemKind::Tiny(k) => write!(f, "tiny:{k}"),
        }
    }
}

impl FromStr for ProblemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bpdn" => Ok(ProblemKind::Bpdn),
            "qcqp" => Ok(ProblemKind::Qcqp),
            "minimax" => Ok(ProblemKind::Minimax),
            _ => match s.strip_prefix("tiny:") {
                Some(kind) => Ok(ProblemKind::Tiny(kind.parse()?)),
                None => Err(Error::Unknown {
                    what: "problem",
                    name: s.to_string(),
                }),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReferenceMode {
    /// Hand solution for tiny instances, grid search up to three variables.
    Auto,
    Off,
    /// Long solver run, cached on disk.
    LongRun,
}

impl FromStr for ReferenceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(ReferenceMode::Auto),
            "off" | "none" => Ok(ReferenceMode::Off),
            "long-run" => Ok(ReferenceMode::LongRun),
            other => Err(Error::Unknown {
                what: "reference mode",
                name: other.to_string(),
            }),
        }
    }
}

/// A full experiment description. Keys mirror the command-line flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: String,
    pub method: Method,
    pub seed: u64,
    pub beta: f64,
    /// Defaults to `beta` (full method) or `beta / blocks` (block method).
    pub rho_y: Option<f64>,
    pub rho_z: Option<f64>,
    pub delta: f64,
    pub blocks: usize,
    pub epochs: usize,
    /// Zero runs the whole budget.
    pub tol: f64,
    pub eta0: Option<f64>,
    pub step: StepMode,
    pub backtrack_factor: f64,
    /// Record interval in epochs; `None` uses the automatic schedule.
    pub record_every: Option<usize>,
    /// Leave `time_ms` empty so repeated runs give identical files.
    pub no_time: bool,
    pub reference: ReferenceMode,
    pub out: Option<PathBuf>,
    /// Load the problem from a JSON instance file instead of generating it.
    pub instance: Option<PathBuf>,
    /// Write the generated problem as a JSON instance file.
    pub dump_instance: Option<PathBuf>,
    pub rows: usize,
    pub cols: usize,
    pub sparsity: usize,
    pub noise: f64,
    pub qcqp_m: usize,
    pub qcqp_p: usize,
    pub minimax_m: usize,
    pub minimax_p: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let b = BpdnSpec::default();
        let q = QcqpSpec::default();
        let mm = MinimaxSpec::default();
        Self {
            problem: "bpdn".into(),
            method: Method::Lalm,
            seed: 0,
            beta: 1.0,
            rho_y: None,
            rho_z: None,
            delta: 0.0,
            blocks: 10,
            epochs: 100_000,
            tol: 0.0,
            eta0: None,
            step: StepMode::Backtracking,
            backtrack_factor: 1.5,
            record_every: None,
            no_time: false,
            reference: ReferenceMode::Auto,
            out: None,
            instance: None,
            dump_instance: None,
            rows: b.rows,
            cols: b.cols,
            sparsity: b.sparsity,
            noise: b.noise,
            qcqp_m: q.m,
            qcqp_p: q.p,
            minimax_m: mm.m,
            minimax_p: mm.p,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    pub fn problem_kind(&self) -> Result<ProblemKind> {
        self.problem.parse()
    }

    /// Number of blocks used on a problem of dimension `dim`.
    pub fn effective_blocks(&self, dim: usize) -> usize {
        match self.method {
            Method::Blalm => self.blocks.clamp(1, dim.max(1)),
            _ => 1,
        }
    }

    pub fn solver_config(&self, dim: usize) -> SolverConfig {
        let n = self.effective_blocks(dim) as f64;
        let rho = match self.method {
            Method::Blalm => self.beta / n,
            _ => self.beta,
        };
        SolverConfig {
            beta: self.beta,
            rho_y: self.rho_y.unwrap_or(rho),
            rho_z: self.rho_z.unwrap_or(rho),
            delta: self.delta,
            step: self.step,
            backtrack_factor: self.backtrack_factor,
            eta0: self.eta0,
            max_epochs: self.epochs,
            tol: self.tol,
            stop: StopRule::Auto,
            record: self
                .record_every
                .map_or(RecordSchedule::Auto, RecordSchedule::Every),
            timing: !self.no_time,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidParameter(
                "epoch budget must be at least 1".into(),
            ));
        }
        self.problem_kind()?;
        Ok(())
    }
}

/// A problem ready to solve.
#[derive(Debug, Clone)]
pub struct PreparedInstance {
    pub problem: ProblemInstance,
    pub x0: Array1<f64>,
    pub reference: Option<ReferenceSolution>,
    pub metadata: serde_json::Value,
}

/// Builds (or loads) the instance described by `cfg`, without a reference.
pub fn build_instance(cfg: &ExperimentConfig) -> Result<PreparedInstance> {
    if let Some(path) = &cfg.instance {
        let doc = InstanceDocument::from_json(&fs::read_to_string(path)?)?;
        let problem = doc.to_problem()?;
        let x0 = Array1::zeros(problem.dim());
        return Ok(PreparedInstance {
            problem,
            x0,
            reference: None,
            metadata: doc.metadata,
        });
    }
    let kind = cfg.problem_kind()?;
    let (problem, x0, reference, metadata) = match kind {
        ProblemKind::Bpdn => {
            let spec = BpdnSpec {
                rows: cfg.rows,
                cols: cfg.cols,
                sparsity: cfg.sparsity,
                noise: cfg.noise,
                seed: cfg.seed,
                ..BpdnSpec::default()
            };
            let inst = gen_bpdn(&spec)?;
            let meta = inst.document()?.metadata;
            let x0 = inst.least_norm_start()?;
            (inst.problem, x0, None, meta)
        }
        ProblemKind::Qcqp => {
            let spec = QcqpSpec {
                m: cfg.qcqp_m,
                p: cfg.qcqp_p,
                seed: cfg.seed,
                ..QcqpSpec::default()
            };
            let problem = gen_qcqp(&spec)?;
            let x0 = Array1::zeros(problem.dim());
            let meta = serde_json::json!({ "kind": "qcqp", "spec": spec });
            (problem, x0, None, meta)
        }
        ProblemKind::Minimax => {
            let spec = MinimaxSpec {
                m: cfg.minimax_m,
                p: cfg.minimax_p,
                seed: cfg.seed,
                ..MinimaxSpec::default()
            };
            let inst = gen_minimax(&spec)?;
            let x0 = inst.start(Array1::zeros(spec.p).view());
            let meta = serde_json::json!({ "kind": "minimax", "spec": spec });
            (inst.problem, x0, None, meta)
        }
        ProblemKind::Tiny(k) => {
            let (problem, sol) = tiny_reference(k)?;
            let x0 = Array1::zeros(problem.dim());
            let meta = serde_json::json!({ "kind": kind.to_string() });
            (problem.with_optimal_value(None), x0, Some(sol), meta)
        }
    };
    Ok(PreparedInstance {
        problem,
        x0,
        reference,
        metadata,
    })
}

/// Attaches a reference solution according to `mode`.
pub fn resolve_reference(inst: &mut PreparedInstance, mode: ReferenceMode) -> Result<()> {
    let reference = match mode {
        ReferenceMode::Off => None,
        ReferenceMode::Auto => match inst.reference.take() {
            Some(r) => Some(r),
            None if inst.problem.dim() <= 3 => Some(brute_force_reference(&inst.problem, 41)?),
            None => None,
        },
        ReferenceMode::LongRun => Some(long_run_reference(
            &inst.problem,
            1_000_000,
            default_cache_dir().as_deref(),
        )?),
    };
    inst.problem = inst
        .problem
        .with_optimal_value(reference.as_ref().map(|r| r.f0));
    inst.reference = reference;
    Ok(())
}

/// Result of [`run`].
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub output: SolveOutput,
    pub reference: Option<ReferenceSolution>,
    pub problem: ProblemInstance,
}

/// Runs `cfg` end to end and writes the CSV trace when `cfg.out` is set.
pub fn run(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let mut inst = build_instance(cfg)?;
    if let Some(path) = &cfg.dump_instance {
        let doc = InstanceDocument::from_problem(&inst.problem, inst.metadata.clone())?;
        fs::write(path, doc.to_json()?)?;
    }
    resolve_reference(&mut inst, cfg.reference)?;
    let output = run_method(cfg, &inst.problem, inst.x0.clone())?;
    if let Some(path) = &cfg.out {
        write_trace(&output.trace, path)?;
    }
    Ok(RunOutcome {
        output,
        reference: inst.reference,
        problem: inst.problem,
    })
}

/// Dispatches to the configured method.
pub fn run_method(
    cfg: &ExperimentConfig,
    prob: &ProblemInstance,
    x0: Array1<f64>,
) -> Result<SolveOutput> {
    let scfg = cfg.solver_config(prob.dim());
    let (m, q) = (prob.num_eq(), prob.num_ineq());
    match cfg.method {
        Method::Lalm => lalm::solve(prob, &scfg, x0, Array1::zeros(m), Array1::zeros(q)),
        Method::Blalm => {
            let n = cfg.effective_blocks(prob.dim());
            let prob = prob.with_partition(BlockPartition::even(prob.dim(), n)?)?;
            blalm::solve(
                &prob,
                &scfg,
                x0,
                Array1::zeros(m),
                Array1::zeros(q),
                cfg.seed,
            )
        }
        Method::Pdyn => pdyn::solve(prob, &PdynConfig::from_solver(&scfg), x0),
    }
}

pub fn write_trace(trace: &Trace, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    trace.write_csv(fs::File::create(path)?)
}

/// Least-squares slope of `log(value)` against `log(epoch)`.
/// Nonpositive values and epoch 0 are dropped; at least 10 samples must remain.
pub fn rate_fit_points(points: &[(f64, f64)]) -> Result<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(e, v)| *e > 0.0 && *v > 0.0 && v.is_finite())
        .map(|(e, v)| (e.ln(), v.ln()))
        .collect();
    if pts.len() < 10 {
        return Err(Error::InsufficientSamples(pts.len()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientSamples(1));
    }
    Ok(sxy / sxx)
}

/// [`rate_fit_points`] on one trace column over epochs `[lo, hi]`.
pub fn rate_fit(trace: &Trace, column: &str, lo: usize, hi: usize) -> Result<f64> {
    let pts: Vec<(f64, f64)> = trace
        .column(column)?
        .into_iter()
        .filter(|(e, _)| (lo..=hi).contains(e))
        .map(|(e, v)| (e as f64, v))
        .collect();
    rate_fit_points(&pts)
}

/// The cache directory from [`CACHE_ENV`], if set.
pub fn default_cache_dir() -> Option<PathBuf> {
    std::env::var_os(CACHE_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
}

/// Reference solution from a long full-method run with backtracking, stopped
/// at KKT residual [`LONG_RUN_TOL`] or after `budget` iterations.
///
/// With `cache` set, results are stored as `<cache>/<content hash>.json` and
/// reused on later calls.
pub fn long_run_reference(
    prob: &ProblemInstance,
    budget: usize,
    cache: Option<&Path>,
) -> Result<ReferenceSolution> {
    long_run_reference_with(prob, budget, cache, None)
}

/// [`long_run_reference`] with an explicit initial backtracking step.
pub fn long_run_reference_with(
    prob: &ProblemInstance,
    budget: usize,
    cache: Option<&Path>,
    eta0: Option<f64>,
) -> Result<ReferenceSolution> {
    let key = InstanceDocument::from_problem(prob, serde_json::Value::Null)
        .and_then(|d| d.content_hash())
        .ok();
    let file = match (cache, &key) {
        (Some(dir), Some(k)) => {
            let suffix = eta0.map_or(String::new(), |e| format!("-eta{e}"));
            Some(dir.join(format!("{k}{suffix}.json")))
        }
        _ => None,
    };
    if let Some(f) = file.as_ref().filter(|f| f.exists()) {
        log::debug!("reference cache hit {}", f.display());
        return Ok(serde_json::from_str(&fs::read_to_string(f)?)?);
    }

    let prob = prob.with_optimal_value(None);
    let cfg = SolverConfig {
        step: StepMode::Backtracking,
        eta0,
        max_epochs: budget,
        tol: LONG_RUN_TOL,
        stop: StopRule::KktMax,
        record: RecordSchedule::Every(usize::MAX),
        timing: false,
        ..SolverConfig::lalm(1.0)
    };
    let (m, q) = (prob.num_eq(), prob.num_ineq());
    let out = Lalm::new(
        &prob,
        cfg,
        Array1::zeros(prob.dim()),
        Array1::zeros(m),
        Array1::zeros(q),
    )?
    .run()?;
    let kkt = kkt_residual(&out.point, &prob)?.max();
    if !out.converged {
        log::warn!("long run stopped at KKT residual {kkt:.3e} after {budget} iterations");
    }
    let sol = ReferenceSolution {
        f0: prob.objective_value(out.point.x.view()),
        x: out.point.x.to_vec(),
        y: out.point.y.to_vec(),
        z: out.point.z.to_vec(),
        provenance: Provenance::LongRun,
        kkt: Some(kkt),
    };
    if let Some(f) = file {
        fs::create_dir_all(f.parent().expect("cache file has a parent"))?;
        fs::write(&f, serde_json::to_string(&sol)?)?;
    }
    Ok(sol)
}
