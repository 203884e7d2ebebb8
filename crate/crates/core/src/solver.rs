//! Configuration and machinery shared by the solvers.

use ndarray::{Array1, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::Evaluation;
use crate::linalg::{all_finite, norm};
use crate::model::{eps_optimality, PrimalDualPoint, ProblemInstance};
use crate::trace::{Method, RecordSchedule, Trace, TraceRecord};

/// Most step-size increases allowed in one backtracking search.
pub const MAX_BACKTRACKS: usize = 200;

/// Relative floating-point slack in the descent test.
pub const DESCENT_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepMode {
    /// `eta = max(eta_prev, L_F + delta)` from known constants.
    Analytic,
    /// Geometric increase until the descent test holds.
    Backtracking,
    /// Analytic when every constant is known, otherwise backtracking.
    Auto,
}

impl std::str::FromStr for StepMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "analytic" => Ok(StepMode::Analytic),
            "backtracking" | "backtrack" => Ok(StepMode::Backtracking),
            "auto" => Ok(StepMode::Auto),
            other => Err(Error::Unknown {
                what: "step mode",
                name: other.to_string(),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopRule {
    /// eps-optimality when a reference value is known, else the KKT residual.
    Auto,
    /// Largest KKT residual component.
    KktMax,
    /// KKT stationarity alone.
    Stationarity,
    /// Run the whole epoch budget.
    Budget,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub beta: f64,
    pub rho_y: f64,
    pub rho_z: f64,
    pub delta: f64,
    pub step: StepMode,
    pub backtrack_factor: f64,
    /// Initial step for backtracking; `None` picks `max(1, L_g)`.
    pub eta0: Option<f64>,
    pub max_epochs: usize,
    pub tol: f64,
    pub stop: StopRule,
    pub record: RecordSchedule,
    pub timing: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self::lalm(1.0)
    }
}

impl SolverConfig {
    /// `rho_y = rho_z = beta`.
    pub fn lalm(beta: f64) -> Self {
        Self {
            beta,
            rho_y: beta,
            rho_z: beta,
            delta: 0.0,
            step: StepMode::Backtracking,
            backtrack_factor: 1.5,
            eta0: None,
            max_epochs: 1000,
            tol: 1e-6,
            stop: StopRule::Auto,
            record: RecordSchedule::Auto,
            timing: true,
        }
    }

    /// `rho_y = rho_z = beta / n`.
    pub fn blalm(beta: f64, blocks: usize) -> Self {
        let n = blocks.max(1) as f64;
        Self {
            rho_y: beta / n,
            rho_z: beta / n,
            ..Self::lalm(beta)
        }
    }

    /// `rho_y = beta / n`, `rho_z = beta / (2n)`.
    pub fn blalm_theory(beta: f64, blocks: usize) -> Self {
        let n = blocks.max(1) as f64;
        Self {
            rho_y: beta / n,
            rho_z: beta / (2.0 * n),
            ..Self::lalm(beta)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return bad(format!("beta = {} must be positive", self.beta));
        }
        for (name, rho) in [("rho_y", self.rho_y), ("rho_z", self.rho_z)] {
            if !(rho > 0.0 && rho <= self.beta) {
                return bad(format!(
                    "{name} = {rho} must lie in (0, beta = {}]",
                    self.beta
                ));
            }
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return bad(format!("delta = {} must be nonnegative", self.delta));
        }
        if !(self.backtrack_factor > 1.0 && self.backtrack_factor.is_finite()) {
            return bad(format!(
                "backtracking factor {} must exceed 1",
                self.backtrack_factor
            ));
        }
        if let Some(e) = self.eta0 {
            if !(e > 0.0 && e.is_finite()) {
                return bad(format!("initial step {e} must be positive"));
            }
        }
        if self.tol.is_nan() {
            return bad("tolerance is NaN".into());
        }
        Ok(())
    }

    /// Whether analytic steps are used on `prob`.
    pub(crate) fn analytic_on(&self, prob: &ProblemInstance) -> Result<bool> {
        let have = constants_known(prob);
        match self.step {
            StepMode::Analytic if !have => Err(Error::MissingConstants(
                "analytic steps need L_g, L_j and B_j; use backtracking".into(),
            )),
            StepMode::Analytic => Ok(true),
            StepMode::Backtracking => Ok(false),
            StepMode::Auto => Ok(have),
        }
    }

    /// Backtracking seed: the configured value or `max(1, L_g)`.
    pub(crate) fn eta_seed(&self, prob: &ProblemInstance) -> f64 {
        self.eta0
            .unwrap_or_else(|| prob.objective().lipschitz().map_or(1.0, |l| l.max(1.0)))
    }
}

fn constants_known(prob: &ProblemInstance) -> bool {
    prob.objective().lipschitz().is_some()
        && prob
            .constraints()
            .iter()
            .all(|c| c.grad_bound.is_some() && c.lipschitz().is_some())
}

/// Sufficient-decrease test `F_new <= F_old + lin + eta/2 ||d||^2`.
pub fn descent_holds(f_new: f64, f_old: f64, lin: f64, eta: f64, step_sq: f64) -> bool {
    f_new <= f_old + lin + 0.5 * eta * step_sq + DESCENT_SLACK * (1.0 + f_old.abs())
}

/// Increases `eta` by `factor` until `trial(eta)` reports acceptance.
/// Returns the accepted step, the trial's payload and the number of increases.
pub fn backtrack<T>(
    eta: f64,
    factor: f64,
    mut trial: impl FnMut(f64) -> Result<(T, bool)>,
) -> Result<(f64, T, usize)> {
    let mut eta = eta;
    for increases in 0..=MAX_BACKTRACKS {
        let (payload, ok) = trial(eta)?;
        if ok {
            return Ok((eta, payload, increases));
        }
        eta *= factor;
    }
    Err(Error::BacktrackLimit(MAX_BACKTRACKS))
}

/// `y + rho_y r`.
pub fn y_update(y: ArrayView1<f64>, r_new: ArrayView1<f64>, rho_y: f64) -> Array1<f64> {
    &y + &(&r_new * rho_y)
}

/// `z_j + rho_z max(-z_j / beta, f_j)`.
///
/// The first branch is evaluated as `z_j (1 - rho_z / beta)`.
pub fn z_update(z: ArrayView1<f64>, f_new: ArrayView1<f64>, rho_z: f64, beta: f64) -> Array1<f64> {
    z.iter()
        .zip(f_new.iter())
        .map(|(&zj, &fj)| {
            if fj <= -zj / beta {
                zj * (1.0 - rho_z / beta)
            } else {
                zj + rho_z * fj
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ErgodicMode {
    /// `sum_t x^{t+1} / eta^t` over `sum_t 1 / eta^t`.
    Weighted,
    /// Block averaging with `n` blocks.
    Uniform { blocks: usize },
}

/// Running primal average; the iterate history is never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct ErgodicAccumulator {
    mode: ErgodicMode,
    sum: Array1<f64>,
    weight: f64,
    count: usize,
    latest: Array1<f64>,
}

impl ErgodicAccumulator {
    pub fn new(mode: ErgodicMode, dim: usize) -> Self {
        Self {
            mode,
            sum: Array1::zeros(dim),
            weight: 0.0,
            count: 0,
            latest: Array1::zeros(dim),
        }
    }

    pub fn mode(&self) -> ErgodicMode {
        self.mode
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn total_weight(&self) -> f64 {
        self.weight
    }

    /// Adds iterate `x^{t+1}` produced with step `eta^t`.
    pub fn push(&mut self, x: ArrayView1<f64>, eta: f64) {
        match self.mode {
            ErgodicMode::Weighted => {
                let w = 1.0 / eta;
                self.sum.scaled_add(w, &x);
                self.weight += w;
            }
            ErgodicMode::Uniform { .. } => {
                self.sum += &x;
                self.weight += 1.0;
                self.latest.assign(&x);
            }
        }
        self.count += 1;
    }

    /// The averaged point.
    ///
    /// Block mode returns `(x^{k+1} + (1/n) sum_{t<k} x^{t+1}) / (1 + k/n)`.
    pub fn point(&self) -> Result<Array1<f64>> {
        self.nonempty()?;
        Ok(match self.mode {
            ErgodicMode::Weighted => &self.sum / self.weight,
            ErgodicMode::Uniform { blocks } => {
                let n = blocks as f64;
                let k = (self.count - 1) as f64;
                let earlier = &self.sum - &self.latest;
                (&self.latest + &(earlier / n)) / (1.0 + k / n)
            }
        })
    }

    /// `sum_{t<=k} x^{t+1} / (1 + k/n)` in block mode, the weighted mean otherwise.
    pub fn normalized_sum(&self) -> Result<Array1<f64>> {
        self.nonempty()?;
        Ok(match self.mode {
            ErgodicMode::Weighted => &self.sum / self.weight,
            ErgodicMode::Uniform { blocks } => {
                let k = (self.count - 1) as f64;
                &self.sum / (1.0 + k / blocks as f64)
            }
        })
    }

    /// Plain mean of the accumulated iterates (block mode) or the weighted mean.
    pub fn mean(&self) -> Result<Array1<f64>> {
        self.nonempty()?;
        Ok(&self.sum / self.weight)
    }

    fn nonempty(&self) -> Result<()> {
        if self.count == 0 {
            Err(Error::InvalidParameter(
                "ergodic average of no iterates".into(),
            ))
        } else {
            Ok(())
        }
    }
}

/// Everything a solve returns.
#[derive(Debug, Clone)]
pub struct SolveOutput {
    pub point: PrimalDualPoint,
    pub ergodic: Option<Array1<f64>>,
    pub trace: Trace,
    /// Primal updates performed (block updates for the block method).
    pub iterations: usize,
    pub epochs: usize,
    pub converged: bool,
    pub eta_max: f64,
}

/// Measures one trace row. `kkt_stat` is supplied by the caller.
#[allow(clippy::too_many_arguments)]
pub(crate) fn measure(
    method: Method,
    epoch: usize,
    prob: &ProblemInstance,
    x: ArrayView1<f64>,
    eval: &Evaluation,
    kkt_stat: f64,
    ergodic: Option<ArrayView1<f64>>,
    eta_max: f64,
) -> TraceRecord {
    let obj = eval.g_val + prob.regularizer().value(x);
    let feas = norm(eval.r.view()) + eval.fvals.iter().map(|&f| f.max(0.0)).sum::<f64>();
    let star = prob.optimal_value();
    let (erg_obj_gap, erg_feas) = match ergodic {
        Some(xb) => (
            star.map(|s| (prob.objective_value(xb) - s).abs()),
            Some(prob.feasibility(xb)),
        ),
        None => (None, None),
    };
    TraceRecord {
        method,
        epoch,
        obj,
        obj_gap: star.map(|s| (obj - s).abs()),
        feas,
        kkt_stat,
        erg_obj_gap,
        erg_feas,
        eta_max,
        time_ms: None,
    }
}

/// Stationarity of the prox-gradient fixed point for a Lagrangian gradient.
pub(crate) fn stationarity(
    prob: &ProblemInstance,
    x: ArrayView1<f64>,
    lag_grad: &Array1<f64>,
) -> f64 {
    let p = prob.regularizer().prox((&x - lag_grad).view(), 1.0);
    norm((&x - &p).view())
}

/// Whether the stop rule looks at the KKT residual.
pub(crate) fn needs_kkt(cfg: &SolverConfig, prob: &ProblemInstance) -> bool {
    cfg.tol > 0.0
        && match cfg.stop {
            StopRule::Budget => false,
            StopRule::KktMax | StopRule::Stationarity => true,
            StopRule::Auto => prob.optimal_value().is_none(),
        }
}

/// Applies the stop rule; `kkt` must be present when [`needs_kkt`] holds.
pub(crate) fn should_stop(
    cfg: &SolverConfig,
    prob: &ProblemInstance,
    x: ArrayView1<f64>,
    ergodic: Option<ArrayView1<f64>>,
    kkt: Option<&crate::model::KktResidual>,
) -> Result<bool> {
    if !(cfg.tol > 0.0) {
        return Ok(false);
    }
    let kkt_ok = |f: fn(&crate::model::KktResidual) -> f64| kkt.is_some_and(|k| f(k) <= cfg.tol);
    Ok(match cfg.stop {
        StopRule::Budget => false,
        StopRule::KktMax => kkt_ok(|k| k.max()),
        StopRule::Stationarity => kkt_ok(|k| k.stationarity),
        StopRule::Auto => match prob.optimal_value() {
            Some(star) => {
                eps_optimality(x, star, cfg.tol, prob)?.satisfied
                    || match ergodic {
                        Some(xb) => eps_optimality(xb, star, cfg.tol, prob)?.satisfied,
                        None => false,
                    }
            }
            None => kkt_ok(|k| k.max()),
        },
    })
}

pub(crate) fn check_start(
    prob: &ProblemInstance,
    x0: &Array1<f64>,
    y0: &Array1<f64>,
    z0: &Array1<f64>,
) -> Result<PrimalDualPoint> {
    let w = PrimalDualPoint::new(prob, x0.clone(), y0.clone(), z0.clone())?;
    if !all_finite(w.x.view()) || !all_finite(w.y.view()) || !all_finite(w.z.view()) {
        return Err(Error::NonFinite("starting point"));
    }
    Ok(w)
}
