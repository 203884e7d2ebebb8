//! Problem representation, proximal operators and optimality metrics.

pub mod document;
pub mod functions;
pub mod metrics;
pub mod problem;
pub mod prox;

pub use document::{DenseMatrix, FunctionSpec, InstanceDocument, ProxSpec};
pub use functions::{
    finite_difference_error, Epigraph, FnSmooth, LeastSquares, Linear, Quadratic, SmoothFunction,
    ZeroFunction,
};
pub use metrics::{eps_optimality, kkt_residual, phi_gap, EpsOptimality, KktResidual};
pub use problem::{
    AffineConstraint, BlockPartition, InequalityConstraint, PrimalDualPoint, ProblemInstance,
};
pub use prox::{
    project_box, prox_l1, BoxDomain, BoxIndicator, L1Norm, L2Norm, ProxFunction, ZeroProx,
};
