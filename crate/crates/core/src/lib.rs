//! Ensemble pruning by sparse second-order cone programming.
//!
//! The weights of an ensemble are fitted by minimizing a convex quadratic
//! model of an accuracy–diversity loss plus an L1 penalty. The problem is
//! written as a second-order cone program and solved by a self-contained
//! primal-dual interior-point method. Models whose weight magnitude falls
//! below a threshold are then dropped, and the remaining ones vote.
//!
//! * [`types`]: prediction tensors, labels, weights, splits.
//! * [`loss`]: the exact ensemble loss and its quadratic surrogate.
//! * [`conic`]: cone programs, the pruning program, QP and quadratic-constraint reformulations.
//! * [`solver`]: the interior-point solver.
//! * [`pipeline`]: cross-validation, thresholding, voting, synthetic data, exhaustive oracle.
//! * [`io`]: file formats.

pub mod conic;
pub mod io;
pub mod loss;
pub mod numeric;
pub mod pipeline;
pub mod rng;
pub mod solver;
pub mod types;

pub use conic::{ConeKind, ConeProgram, ConicSolution, SolveStatus};
pub use loss::{build_surrogate, exact_loss, LossValue, QuadraticSurrogate};
pub use pipeline::{run_pipeline, DataSource, PruneConfig, PruneReport};
pub use solver::{solve, SolverSettings};
pub use types::{LabelVector, PredictionTensor, SplitSpec, WeightVector};
