//! Primal-dual baseline with virtual-queue multipliers for programs without
//! equality constraints and with `h` the indicator of a simple set.
//!
//! `x+ = P_X(x - (1/eta)[grad f0(x) + sum_j (lambda_j + f_j(x)) grad f_j(x)])`,
//! `lambda_j+ = max(-f_j(x), lambda_j + f_j(x))`.

use ndarray::{Array1, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::Evaluation;
use crate::lalm::{diverged, kkt_at};
use crate::linalg::{all_finite, norm_sq};
use crate::model::{KktResidual, ProblemInstance};
use crate::solver::{
    backtrack, descent_holds, measure, needs_kkt, should_stop, SolveOutput, SolverConfig, StepMode,
};
use crate::trace::{Method, Recorder};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdynConfig {
    /// Backtracking on `phi(x, z) = f0(x) + sum_j z_j f_j(x)`; fixed step otherwise.
    pub adaptive: bool,
    /// Initial (or fixed) step; `None` picks `max(1, L_g)`.
    pub eta0: Option<f64>,
    pub backtrack_factor: f64,
    pub max_epochs: usize,
    pub tol: f64,
    pub stop: crate::solver::StopRule,
    pub record: crate::trace::RecordSchedule,
    pub timing: bool,
}

impl Default for PdynConfig {
    fn default() -> Self {
        Self::from_solver(&SolverConfig::default())
    }
}

impl PdynConfig {
    /// Shares step seed, budgets and recording with a solver configuration.
    pub fn from_solver(cfg: &SolverConfig) -> Self {
        Self {
            adaptive: cfg.step != StepMode::Analytic,
            eta0: cfg.eta0,
            backtrack_factor: cfg.backtrack_factor,
            max_epochs: cfg.max_epochs,
            tol: cfg.tol,
            stop: cfg.stop,
            record: cfg.record,
            timing: cfg.timing,
        }
    }

    fn as_solver(&self) -> SolverConfig {
        SolverConfig {
            eta0: self.eta0,
            backtrack_factor: self.backtrack_factor,
            max_epochs: self.max_epochs,
            tol: self.tol,
            stop: self.stop,
            record: self.record,
            timing: self.timing,
            ..SolverConfig::default()
        }
    }
}

/// `lambda_j^0 = max(0, -f_j(x^0))`.
pub fn initial_queues(fvals: ArrayView1<f64>) -> Array1<f64> {
    fvals.mapv(|f| (-f).max(0.0))
}

/// `max(-f_j, lambda_j + f_j)`.
pub fn queue_update(lambda: ArrayView1<f64>, fvals: ArrayView1<f64>) -> Array1<f64> {
    lambda
        .iter()
        .zip(fvals.iter())
        .map(|(&l, &f)| (-f).max(l + f))
        .collect()
}

#[derive(Debug, Clone)]
pub struct Pdyn<'a> {
    prob: &'a ProblemInstance,
    cfg: PdynConfig,
    x: Array1<f64>,
    lambda: Array1<f64>,
    eval: Evaluation,
    eta: f64,
    k: usize,
}

impl<'a> Pdyn<'a> {
    pub fn new(prob: &'a ProblemInstance, cfg: PdynConfig, x0: Array1<f64>) -> Result<Self> {
        if prob.num_eq() > 0 {
            return Err(Error::Incompatible(
                "the primal-dual baseline does not handle equality constraints".into(),
            ));
        }
        if !prob.regularizer().is_indicator() {
            return Err(Error::Incompatible(
                "the primal-dual baseline needs h to be a set indicator".into(),
            ));
        }
        let mut check = cfg.as_solver();
        check.step = StepMode::Backtracking;
        check.validate()?;
        crate::error::check_dim("starting point", prob.dim(), x0.len())?;
        if !all_finite(x0.view()) {
            return Err(Error::NonFinite("starting point"));
        }
        let eval = Evaluation::at(prob, x0.view());
        let eta = check.eta_seed(prob);
        Ok(Self {
            prob,
            lambda: initial_queues(eval.fvals.view()),
            eval,
            x: x0,
            eta,
            k: 0,
            cfg,
        })
    }

    pub fn x(&self) -> &Array1<f64> {
        &self.x
    }

    pub fn lambda(&self) -> &Array1<f64> {
        &self.lambda
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn iteration(&self) -> usize {
        self.k
    }

    /// `z_j = lambda_j + f_j(x)`.
    pub fn virtual_multipliers(&self) -> Array1<f64> {
        &self.lambda + &self.eval.fvals
    }

    /// Search direction `grad_x phi(x, z)` at the current point.
    pub fn direction(&self) -> Array1<f64> {
        let z = self.virtual_multipliers();
        self.eval
            .lagrangian_gradient(self.prob, self.x.view(), Array1::zeros(0).view(), z.view())
    }

    /// KKT residual with multiplier estimate `[lambda + f(x)]_+`.
    pub fn kkt(&self) -> KktResidual {
        let z = self.virtual_multipliers().mapv(|v| v.max(0.0));
        kkt_at(self.prob, &self.x, &Array1::zeros(0), &z, &self.eval)
    }

    pub fn step(&mut self) -> Result<usize> {
        let prob = self.prob;
        let z = self.virtual_multipliers();
        let d = self.direction();
        if !all_finite(d.view()) {
            return Err(Error::NonFinite("gradient"));
        }
        let phi_old = self.eval.weighted_value(z.view());
        let x = self.x.view();
        let trial = |eta: f64| -> Result<((Array1<f64>, Evaluation), bool)> {
            let v = &x - &(&d / eta);
            let xn = prob.regularizer().prox(v.view(), 1.0 / eta);
            let ev = Evaluation::at(prob, xn.view());
            let step = &xn - &x;
            let ok = descent_holds(
                ev.weighted_value(z.view()),
                phi_old,
                d.dot(&step),
                eta,
                norm_sq(step.view()),
            );
            Ok(((xn, ev), ok))
        };
        let (eta, (xn, ev), backtracks) = if self.cfg.adaptive {
            backtrack(self.eta, self.cfg.backtrack_factor, trial)?
        } else {
            let (payload, _) = trial(self.eta)?;
            (self.eta, payload, 0)
        };
        if !all_finite(xn.view()) {
            return Err(Error::NonFinite("primal iterate"));
        }
        self.lambda = queue_update(self.lambda.view(), self.eval.fvals.view());
        self.x = xn;
        self.eval = ev;
        self.eta = eta;
        self.k += 1;
        Ok(backtracks)
    }

    pub fn run(mut self) -> Result<SolveOutput> {
        let prob = self.prob;
        let solver_cfg = self.cfg.as_solver();
        let mut rec = Recorder::new(self.cfg.record, self.cfg.max_epochs, self.cfg.timing);
        let check_kkt = needs_kkt(&solver_cfg, prob);
        let mut converged = false;
        let kkt = self.kkt();
        self.record_with(&mut rec, 0, &kkt);
        while self.k < self.cfg.max_epochs {
            if let Err(e) = self.step() {
                return Err(diverged(e, self.k, rec));
            }
            if !self.eval.g_val.is_finite() {
                return Err(diverged(Error::NonFinite("objective"), self.k, rec));
            }
            let due = rec.due(self.k);
            let kkt = (due || check_kkt).then(|| self.kkt());
            if let (true, Some(kkt)) = (due, &kkt) {
                self.record_with(&mut rec, self.k, kkt);
            }
            if should_stop(&solver_cfg, prob, self.x.view(), None, kkt.as_ref())? {
                converged = true;
                break;
            }
        }
        if converged && !rec.recorded(self.k) {
            let kkt = self.kkt();
            self.record_with(&mut rec, self.k, &kkt);
        }
        let z = self.virtual_multipliers().mapv(|v| v.max(0.0));
        Ok(SolveOutput {
            point: self.eval.point(&self.x, &Array1::zeros(0), &z),
            ergodic: None,
            trace: rec.trace,
            iterations: self.k,
            epochs: self.k,
            converged,
            eta_max: self.eta,
        })
    }

    fn record_with(&self, rec: &mut Recorder, epoch: usize, kkt: &KktResidual) {
        rec.push(measure(
            Method::Pdyn,
            epoch,
            self.prob,
            self.x.view(),
            &self.eval,
            kkt.stationarity,
            None,
            self.eta,
        ));
    }
}

pub fn solve(prob: &ProblemInstance, cfg: &PdynConfig, x0: Array1<f64>) -> Result<SolveOutput> {
    Pdyn::new(prob, cfg.clone(), x0)?.run()
}
