//! Linearized augmented Lagrangian method with full primal updates.

use ndarray::{Array1, ArrayView1};

use crate::auglag::{objective_lipschitz, penalty_lipschitz_raw};
use crate::error::{Error, Result};
use crate::eval::Evaluation;
use crate::linalg::{all_finite, norm_sq};
use crate::model::{KktResidual, PrimalDualPoint, ProblemInstance};
use crate::solver::{
    backtrack, check_start, descent_holds, measure, needs_kkt, should_stop, stationarity, y_update,
    z_update, ErgodicAccumulator, ErgodicMode, SolveOutput, SolverConfig,
};
use crate::trace::{Method, Recorder};

/// Trial point, its cache and the descent margin.
type Trial = (Array1<f64>, Evaluation, f64);

/// `max(eta_prev, L_F(x, z) + delta)`.
pub fn eta_analytic(
    eta_prev: f64,
    fvals: ArrayView1<f64>,
    z: ArrayView1<f64>,
    cfg: &SolverConfig,
    prob: &ProblemInstance,
) -> Result<f64> {
    let lf = objective_lipschitz(prob)?
        + cfg.beta * prob.a_norm_sq()
        + penalty_lipschitz_raw(fvals, z, cfg.beta, prob)?;
    Ok(eta_prev.max(lf + cfg.delta))
}

/// Prox-gradient step `prox_{h/eta}(x - grad / eta)`.
pub fn x_update(
    x: ArrayView1<f64>,
    grad: ArrayView1<f64>,
    eta: f64,
    prob: &ProblemInstance,
) -> Array1<f64> {
    let v = &x - &(&grad / eta);
    prob.regularizer().prox(v.view(), 1.0 / eta)
}

/// Result of one accepted step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    pub eta: f64,
    pub backtracks: usize,
    /// `F(x+, y, z) - F(w) - <grad, d> - eta/2 ||d||^2`, nonpositive up to rounding.
    pub descent_margin: f64,
}

/// Iteration state of the full-vector method.
#[derive(Debug, Clone)]
pub struct Lalm<'a> {
    prob: &'a ProblemInstance,
    cfg: SolverConfig,
    analytic: bool,
    x: Array1<f64>,
    y: Array1<f64>,
    z: Array1<f64>,
    eval: Evaluation,
    eta: f64,
    k: usize,
    ergodic: ErgodicAccumulator,
}

impl<'a> Lalm<'a> {
    pub fn new(
        prob: &'a ProblemInstance,
        cfg: SolverConfig,
        x0: Array1<f64>,
        y0: Array1<f64>,
        z0: Array1<f64>,
    ) -> Result<Self> {
        cfg.validate()?;
        let analytic = cfg.analytic_on(prob)?;
        let w = check_start(prob, &x0, &y0, &z0)?;
        let eta = if analytic { 0.0 } else { cfg.eta_seed(prob) };
        Ok(Self {
            prob,
            analytic,
            eval: Evaluation::at(prob, w.x.view()),
            x: w.x,
            y: w.y,
            z: w.z,
            eta,
            k: 0,
            ergodic: ErgodicAccumulator::new(ErgodicMode::Weighted, prob.dim()),
            cfg,
        })
    }

    /// Starts from `x0` with zero multipliers.
    pub fn from_primal(
        prob: &'a ProblemInstance,
        cfg: SolverConfig,
        x0: Array1<f64>,
    ) -> Result<Self> {
        let (m, q) = (prob.num_eq(), prob.num_ineq());
        Self::new(prob, cfg, x0, Array1::zeros(m), Array1::zeros(q))
    }

    pub fn x(&self) -> &Array1<f64> {
        &self.x
    }

    pub fn y(&self) -> &Array1<f64> {
        &self.y
    }

    pub fn z(&self) -> &Array1<f64> {
        &self.z
    }

    /// Most recent step size (zero before the first analytic step).
    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn iteration(&self) -> usize {
        self.k
    }

    pub fn is_analytic(&self) -> bool {
        self.analytic
    }

    pub fn evaluation(&self) -> &Evaluation {
        &self.eval
    }

    pub fn ergodic(&self) -> &ErgodicAccumulator {
        &self.ergodic
    }

    pub fn point(&self) -> PrimalDualPoint {
        self.eval.point(&self.x, &self.y, &self.z)
    }

    pub fn kkt(&self) -> KktResidual {
        kkt_at(self.prob, &self.x, &self.y, &self.z, &self.eval)
    }

    /// One iteration `w^k -> w^{k+1}`.
    pub fn step(&mut self) -> Result<StepInfo> {
        let prob = self.prob;
        let beta = self.cfg.beta;
        let f_old = self.eval.smooth_value(self.y.view(), self.z.view(), beta);
        if !f_old.is_finite() {
            return Err(Error::NonFinite("augmented Lagrangian"));
        }
        let grad =
            self.eval
                .smooth_gradient(prob, self.x.view(), self.y.view(), self.z.view(), beta);
        if !all_finite(grad.view()) {
            return Err(Error::NonFinite("gradient"));
        }

        let (y, z, x) = (self.y.view(), self.z.view(), self.x.view());
        let trial = |eta: f64| -> Result<(Trial, bool)> {
            let xn = x_update(x, grad.view(), eta, prob);
            let ev = Evaluation::at(prob, xn.view());
            let d = &xn - &x;
            let (lin, dsq) = (grad.dot(&d), norm_sq(d.view()));
            let f_new = ev.smooth_value(y, z, beta);
            let margin = f_new - f_old - lin - 0.5 * eta * dsq;
            let ok = descent_holds(f_new, f_old, lin, eta, dsq);
            Ok(((xn, ev, margin), ok))
        };

        let (eta, (xn, ev, margin), backtracks) = if self.analytic {
            let eta = eta_analytic(self.eta, self.eval.fvals.view(), z, &self.cfg, prob)?;
            let (payload, _) = trial(eta)?;
            (eta, payload, 0)
        } else {
            backtrack(self.eta, self.cfg.backtrack_factor, trial)?
        };

        if !all_finite(xn.view()) {
            return Err(Error::NonFinite("primal iterate"));
        }
        self.y = y_update(self.y.view(), ev.r.view(), self.cfg.rho_y);
        self.z = z_update(self.z.view(), ev.fvals.view(), self.cfg.rho_z, beta);
        self.ergodic.push(xn.view(), eta);
        self.x = xn;
        self.eval = ev;
        self.eta = eta;
        self.k += 1;
        Ok(StepInfo {
            eta,
            backtracks,
            descent_margin: margin,
        })
    }

    /// Runs to the epoch budget or the stop rule, recording a trace.
    pub fn run(mut self) -> Result<SolveOutput> {
        let prob = self.prob;
        let mut rec = Recorder::new(self.cfg.record, self.cfg.max_epochs, self.cfg.timing);
        let mut converged = false;
        let check_kkt = needs_kkt(&self.cfg, prob);
        self.record(&mut rec, 0, None);
        while self.k < self.cfg.max_epochs {
            if let Err(e) = self.step() {
                return Err(diverged(e, self.k, rec));
            }
            if !self.eval.g_val.is_finite() {
                return Err(diverged(Error::NonFinite("objective"), self.k, rec));
            }
            let xbar = self.ergodic.point()?;
            let due = rec.due(self.k);
            let kkt = (due || check_kkt).then(|| self.kkt());
            if let (true, Some(kkt)) = (due, &kkt) {
                self.record_with(&mut rec, self.k, Some(xbar.view()), kkt);
            }
            if should_stop(
                &self.cfg,
                prob,
                self.x.view(),
                Some(xbar.view()),
                kkt.as_ref(),
            )? {
                converged = true;
                break;
            }
        }
        let ergodic = self.ergodic.point().ok();
        if converged && !rec.recorded(self.k) {
            let kkt = self.kkt();
            self.record_with(&mut rec, self.k, ergodic.as_ref().map(|v| v.view()), &kkt);
        }
        Ok(SolveOutput {
            point: self.point(),
            ergodic,
            trace: rec.trace,
            iterations: self.k,
            epochs: self.k,
            converged,
            eta_max: self.eta,
        })
    }

    fn record(&self, rec: &mut Recorder, epoch: usize, xbar: Option<ArrayView1<f64>>) {
        let kkt = self.kkt();
        self.record_with(rec, epoch, xbar, &kkt);
    }

    fn record_with(
        &self,
        rec: &mut Recorder,
        epoch: usize,
        xbar: Option<ArrayView1<f64>>,
        kkt: &KktResidual,
    ) {
        rec.push(measure(
            Method::Lalm,
            epoch,
            self.prob,
            self.x.view(),
            &self.eval,
            kkt.stationarity,
            xbar,
            self.eta,
        ));
    }
}

pub(crate) fn kkt_at(
    prob: &ProblemInstance,
    x: &Array1<f64>,
    y: &Array1<f64>,
    z: &Array1<f64>,
    eval: &Evaluation,
) -> KktResidual {
    let g = eval.lagrangian_gradient(prob, x.view(), y.view(), z.view());
    let stat = stationarity(prob, x.view(), &g);
    let feasibility =
        crate::linalg::norm(eval.r.view()) + eval.fvals.iter().map(|&f| f.max(0.0)).sum::<f64>();
    let complementarity = z
        .iter()
        .zip(eval.fvals.iter())
        .map(|(a, b)| (a * b).abs())
        .sum();
    KktResidual {
        stationarity: stat,
        feasibility,
        complementarity,
    }
}

pub(crate) fn diverged(e: Error, iteration: usize, rec: Recorder) -> Error {
    match e {
        Error::NonFinite(what) => Error::Diverged {
            iteration,
            reason: format!("non-finite {what}"),
            trace: Box::new(rec.trace),
        },
        Error::BacktrackLimit(n) => Error::Diverged {
            iteration,
            reason: format!("step size search exceeded {n} increases"),
            trace: Box::new(rec.trace),
        },
        other => other,
    }
}

/// Runs the method from `(x0, y0, z0)`.
pub fn solve(
    prob: &ProblemInstance,
    cfg: &SolverConfig,
    x0: Array1<f64>,
    y0: Array1<f64>,
    z0: Array1<f64>,
) -> Result<SolveOutput> {
    Lalm::new(prob, cfg.clone(), x0, y0, z0)?.run()
}
