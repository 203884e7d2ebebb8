//! Linearized augmented Lagrangian methods for convex programs
//!
//! `min g(x) + h(x)  s.t.  Ax = b,  f_j(x) <= 0`
//!
//! with `g`, `f_j` smooth convex and `h` convex with a cheap prox.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod auglag;
pub mod blalm;
pub mod error;
pub mod eval;
pub mod harness;
pub mod instances;
pub mod lalm;
pub mod linalg;
pub mod model;
pub mod pdyn;
pub mod solver;
pub mod trace;

pub use error::{Error, Result};
pub use eval::Evaluation;
pub use lalm::Lalm;
pub use linalg::{DenseOperator, LinearOperator};
pub use model::*;
pub use solver::{ErgodicAccumulator, ErgodicMode, SolveOutput, SolverConfig, StepMode, StopRule};
pub use trace::{Method, RecordSchedule, Trace, TraceRecord};
