//! Randomized block linearized augmented Lagrangian method.

use std::ops::Range;

use ndarray::{s, Array1, Array2, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::auglag::{objective_lipschitz, penalty_lipschitz_raw};
use crate::error::{Error, Result};
use crate::eval::Evaluation;
use crate::lalm::{diverged, kkt_at, StepInfo};
use crate::linalg::{all_finite, norm_sq, operator_norm_sq, LinearOperator, NORM_TOL};
use crate::model::{BlockPartition, KktResidual, PrimalDualPoint, ProblemInstance};
use crate::solver::{
    backtrack, check_start, descent_holds, measure, needs_kkt, should_stop, y_update, z_update,
    ErgodicAccumulator, ErgodicMode, SolveOutput, SolverConfig,
};
use crate::trace::{Method, Recorder};

/// Trial block, full point, cache and descent margin.
type BlockTrial = (Array1<f64>, Array1<f64>, Evaluation, f64);

/// Full recomputation of the cached residual and constraint values every
/// this many epochs.
pub const REFRESH_EPOCHS: usize = 10;

/// Column block `A_i` of an operator, viewed as an operator.
#[derive(Debug)]
pub struct ColumnBlock<'a> {
    op: &'a dyn LinearOperator,
    block: Range<usize>,
}

impl<'a> ColumnBlock<'a> {
    pub fn new(op: &'a dyn LinearOperator, block: Range<usize>) -> Self {
        Self { op, block }
    }
}

impl LinearOperator for ColumnBlock<'_> {
    fn rows(&self) -> usize {
        self.op.rows()
    }

    fn cols(&self) -> usize {
        self.block.len()
    }

    fn apply(&self, x: ArrayView1<f64>) -> Array1<f64> {
        self.op.apply_block(self.block.clone(), x)
    }

    fn apply_adjoint(&self, y: ArrayView1<f64>) -> Array1<f64> {
        self.op.adjoint_block(self.block.clone(), y)
    }

    fn apply_block(&self, block: Range<usize>, x_block: ArrayView1<f64>) -> Array1<f64> {
        let shifted = (self.block.start + block.start)..(self.block.start + block.end);
        self.op.apply_block(shifted, x_block)
    }

    fn adjoint_block(&self, block: Range<usize>, y: ArrayView1<f64>) -> Array1<f64> {
        let shifted = (self.block.start + block.start)..(self.block.start + block.end);
        self.op.adjoint_block(shifted, y)
    }

    fn to_dense(&self) -> Array2<f64> {
        self.op
            .to_dense()
            .slice(s![.., self.block.clone()])
            .to_owned()
    }
}

/// Uniform block sampler with a reproducible stream.
#[derive(Debug, Clone)]
pub struct BlockSampler {
    rng: ChaCha8Rng,
    n: usize,
}

impl BlockSampler {
    pub fn new(n: usize, seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            n: n.max(1),
        }
    }

    /// Zero-based block index.
    pub fn pick_block(&mut self) -> usize {
        if self.n == 1 {
            0
        } else {
            self.rng.random_range(0..self.n)
        }
    }
}

/// Iteration state of the block method.
#[derive(Debug, Clone)]
pub struct BlockLalm<'a> {
    prob: &'a ProblemInstance,
    cfg: SolverConfig,
    analytic: bool,
    partition: BlockPartition,
    block_norms: Vec<f64>,
    x: Array1<f64>,
    y: Array1<f64>,
    z: Array1<f64>,
    eval: Evaluation,
    etas: Vec<f64>,
    k: usize,
    sampler: BlockSampler,
    ergodic: ErgodicAccumulator,
}

impl<'a> BlockLalm<'a> {
    pub fn new(
        prob: &'a ProblemInstance,
        cfg: SolverConfig,
        x0: Array1<f64>,
        y0: Array1<f64>,
        z0: Array1<f64>,
        seed: u64,
    ) -> Result<Self> {
        cfg.validate()?;
        let partition = prob.partition().ok_or(Error::MissingPartition)?.clone();
        if !prob.regularizer().separable_over(&partition) {
            return Err(Error::NonSeparable);
        }
        let analytic = cfg.analytic_on(prob)?;
        let w = check_start(prob, &x0, &y0, &z0)?;
        let block_norms = block_norms_sq(prob, &partition)?;
        let n = partition.len();
        let seed_eta = if analytic { 0.0 } else { cfg.eta_seed(prob) };
        Ok(Self {
            prob,
            analytic,
            block_norms,
            eval: Evaluation::at(prob, w.x.view()),
            x: w.x,
            y: w.y,
            z: w.z,
            etas: vec![seed_eta; n],
            k: 0,
            sampler: BlockSampler::new(n, seed),
            ergodic: ErgodicAccumulator::new(ErgodicMode::Uniform { blocks: n }, prob.dim()),
            partition,
            cfg,
        })
    }

    pub fn from_primal(
        prob: &'a ProblemInstance,
        cfg: SolverConfig,
        x0: Array1<f64>,
        seed: u64,
    ) -> Result<Self> {
        let (m, q) = (prob.num_eq(), prob.num_ineq());
        Self::new(prob, cfg, x0, Array1::zeros(m), Array1::zeros(q), seed)
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

    pub fn etas(&self) -> &[f64] {
        &self.etas
    }

    pub fn eta_max(&self) -> f64 {
        self.etas.iter().cloned().fold(0.0, f64::max)
    }

    pub fn num_blocks(&self) -> usize {
        self.partition.len()
    }

    /// Block updates performed so far.
    pub fn iteration(&self) -> usize {
        self.k
    }

    pub fn epoch(&self) -> usize {
        self.k / self.partition.len()
    }

    pub fn evaluation(&self) -> &Evaluation {
        &self.eval
    }

    pub fn ergodic(&self) -> &ErgodicAccumulator {
        &self.ergodic
    }

    /// `||A_i||^2` for every block.
    pub fn block_norms_sq(&self) -> &[f64] {
        &self.block_norms
    }

    pub fn point(&self) -> PrimalDualPoint {
        self.eval.point(&self.x, &self.y, &self.z)
    }

    pub fn kkt(&self) -> KktResidual {
        kkt_at(self.prob, &self.x, &self.y, &self.z, &self.eval)
    }

    /// Recomputes the cached residual and constraint values from scratch.
    pub fn refresh(&mut self) {
        self.eval = Evaluation::at(self.prob, self.x.view());
    }

    /// Samples a block and updates it.
    pub fn step(&mut self) -> Result<(usize, StepInfo)> {
        let i = self.sampler.pick_block();
        Ok((i, self.step_block(i)?))
    }

    /// Updates block `i` followed by both multipliers.
    pub fn step_block(&mut self, i: usize) -> Result<StepInfo> {
        let prob = self.prob;
        let beta = self.cfg.beta;
        if i >= self.partition.len() {
            return Err(Error::InvalidParameter(format!(
                "block index {i} out of range"
            )));
        }
        let block = self.partition.block(i);
        let f_old = self.eval.smooth_value(self.y.view(), self.z.view(), beta);
        if !f_old.is_finite() {
            return Err(Error::NonFinite("augmented Lagrangian"));
        }
        let gi = self.eval.smooth_partial(
            prob,
            self.x.view(),
            self.y.view(),
            self.z.view(),
            beta,
            block.clone(),
        );
        if !all_finite(gi.view()) {
            return Err(Error::NonFinite("partial gradient"));
        }

        let (x, y, z, eval) = (&self.x, self.y.view(), self.z.view(), &self.eval);
        let xi = x.slice(s![block.clone()]);
        let trial = |eta: f64| -> Result<(BlockTrial, bool)> {
            let d = block_x_update(prob, block.clone(), xi, gi.view(), eta) - xi;
            let mut xn = x.clone();
            xn.slice_mut(s![block.clone()]).scaled_add(1.0, &d);
            let ev = eval.shifted(prob, xn.view(), block.clone(), d.view());
            let (lin, dsq) = (gi.dot(&d), norm_sq(d.view()));
            let f_new = ev.smooth_value(y, z, beta);
            let margin = f_new - f_old - lin - 0.5 * eta * dsq;
            let ok = descent_holds(f_new, f_old, lin, eta, dsq);
            Ok(((xn, d, ev, margin), ok))
        };

        let (eta, (xn, _d, ev, margin), backtracks) = if self.analytic {
            let lf = objective_lipschitz(prob)?
                + beta * self.block_norms[i]
                + penalty_lipschitz_raw(self.eval.fvals.view(), z, beta, prob)?;
            let eta = self.etas[i].max(lf + self.cfg.delta);
            let (payload, _) = trial(eta)?;
            (eta, payload, 0)
        } else {
            backtrack(self.etas[i], self.cfg.backtrack_factor, trial)?
        };
        if !all_finite(xn.view()) {
            return Err(Error::NonFinite("primal iterate"));
        }

        self.y = y_update(self.y.view(), ev.r.view(), self.cfg.rho_y);
        self.z = z_update(self.z.view(), ev.fvals.view(), self.cfg.rho_z, beta);
        self.ergodic.push(xn.view(), eta);
        self.x = xn;
        self.eval = ev;
        self.etas[i] = eta;
        self.k += 1;
        if self.k.is_multiple_of(REFRESH_EPOCHS * self.partition.len()) {
            self.refresh();
        }
        Ok(StepInfo {
            eta,
            backtracks,
            descent_margin: margin,
        })
    }

    /// Runs to the epoch budget or the stop rule, checking once per epoch.
    pub fn run(mut self) -> Result<SolveOutput> {
        let prob = self.prob;
        let n = self.partition.len();
        let mut rec = Recorder::new(self.cfg.record, self.cfg.max_epochs, self.cfg.timing);
        let check_kkt = needs_kkt(&self.cfg, prob);
        let mut converged = false;
        let kkt = self.kkt();
        self.record_with(&mut rec, 0, None, &kkt);
        while self.epoch() < self.cfg.max_epochs {
            for _ in 0..n {
                if let Err(e) = self.step() {
                    return Err(diverged(e, self.k, rec));
                }
            }
            if !self.eval.g_val.is_finite() {
                return Err(diverged(Error::NonFinite("objective"), self.k, rec));
            }
            let epoch = self.epoch();
            let xbar = self.ergodic.point()?;
            let due = rec.due(epoch);
            let kkt = (due || check_kkt).then(|| self.kkt());
            if let (true, Some(kkt)) = (due, &kkt) {
                self.record_with(&mut rec, epoch, Some(xbar.view()), kkt);
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
        let epoch = self.epoch();
        if converged && !rec.recorded(epoch) {
            let kkt = self.kkt();
            self.record_with(&mut rec, epoch, ergodic.as_ref().map(|v| v.view()), &kkt);
        }
        Ok(SolveOutput {
            point: self.point(),
            ergodic,
            trace: rec.trace,
            iterations: self.k,
            epochs: epoch,
            converged,
            eta_max: self.eta_max(),
        })
    }

    fn record_with(
        &self,
        rec: &mut Recorder,
        epoch: usize,
        xbar: Option<ArrayView1<f64>>,
        kkt: &KktResidual,
    ) {
        rec.push(measure(
            Method::Blalm,
            epoch,
            self.prob,
            self.x.view(),
            &self.eval,
            kkt.stationarity,
            xbar,
            self.eta_max(),
        ));
    }
}

/// Block prox-gradient step `prox_{h_i/eta}(x_i - g_i / eta)`.
pub fn block_x_update(
    prob: &ProblemInstance,
    block: Range<usize>,
    x_block: ArrayView1<f64>,
    grad_block: ArrayView1<f64>,
    eta: f64,
) -> Array1<f64> {
    let v = &x_block - &(&grad_block / eta);
    prob.regularizer().prox_block(block, v.view(), 1.0 / eta)
}

fn block_norms_sq(prob: &ProblemInstance, partition: &BlockPartition) -> Result<Vec<f64>> {
    match prob.affine() {
        None => Ok(vec![0.0; partition.len()]),
        Some(_) if partition.len() == 1 => Ok(vec![prob.a_norm_sq()]),
        Some(a) => partition
            .ranges()
            .iter()
            .map(|r| operator_norm_sq(&ColumnBlock::new(a.operator(), r.clone()), NORM_TOL))
            .collect(),
    }
}

/// Runs the block method from `(x0, y0, z0)` with sampler seed `seed`.
pub fn solve(
    prob: &ProblemInstance,
    cfg: &SolverConfig,
    x0: Array1<f64>,
    y0: Array1<f64>,
    z0: Array1<f64>,
    seed: u64,
) -> Result<SolveOutput> {
    BlockLalm::new(prob, cfg.clone(), x0, y0, z0, seed)?.run()
}
