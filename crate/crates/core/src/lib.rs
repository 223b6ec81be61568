//! Bayesian linear inverse problems with convex constraints.
//!
//! A Gaussian posterior is pushed onto a closed convex set by the oblique
//! projection in its own precision metric. Samples of the projected
//! distribution are obtained by solving randomized constrained least squares
//! problems, and for polyhedral cones a hierarchical Gibbs sampler also
//! updates the noise and prior precisions.
//!
//! Every numerical type is generic over [`Real`] (`f32` or `f64`); the
//! aliases at the crate root fix the scalar to `f64`.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod constraints;
pub mod densities;
pub mod diagnostics;
pub mod error;
pub mod forward;
pub mod gaussian;
pub mod gibbs;
pub mod operator;
pub mod projector;
pub mod quadrature;
pub mod rng;
pub mod scalar;
pub mod solver;
pub mod special;
pub mod stats;
pub mod testing;

pub use error::{Error, Result};
pub use rng::{stream, substream, Stream};
pub use scalar::Real;

pub type Gaussian = gaussian::Gaussian<f64>;
pub type ConstraintSet = constraints::ConstraintSet<f64>;
pub type LinearOperator = operator::LinearOperator<f64>;
pub use constraints::FaceId;
pub use solver::SolverConfig;
pub type ForwardPair = solver::ForwardPair<f64>;
pub type ObliqueProjector = solver::ObliqueProjector<f64>;
pub type SolverReport = solver::SolverReport<f64>;
pub type HierarchicalModel = gibbs::HierarchicalModel<f64>;
pub type Chain = gibbs::Chain<f64>;
pub use gibbs::{ChainOptions, HyperPrior};
pub type ProblemInstance = forward::ProblemInstance<f64>;
pub use diagnostics::SummaryTable;
