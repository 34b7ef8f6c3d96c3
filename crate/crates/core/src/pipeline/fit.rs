//! Weight fitting: surrogate → pruning program → interior-point solve.

use super::{Anchor, PipelineError};
use crate::conic::{build_pruning_socp_with, PruningOptions, SolveStatus};
use crate::loss::{build_surrogate, QuadraticSurrogate};
use crate::numeric::norm_inf;
use crate::solver::{solve, SolverSettings};
use crate::types::{LabelVector, PredictionTensor, WeightVector};
use serde::{Deserialize, Serialize};

/// How a grid value of `lambda` is turned into the L1 coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaScale {
    /// `lambda · lambda_max(alpha)`, where `lambda_max` is the smallest
    /// coefficient at which the zero vector is optimal. Grid values in
    /// `(0, 1)` then always give a nontrivial sparse solution.
    #[default]
    Relative,
    /// `lambda` as given.
    Absolute,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FitOptions {
    pub simplex: bool,
    pub lambda_scale: LambdaScale,
    pub solver: SolverSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub weights: WeightVector,
    /// The L1 coefficient actually used.
    pub effective_lambda: f64,
    pub status: SolveStatus,
    pub iterations: usize,
    pub objective: f64,
}

/// `‖alpha·q_lin + (1 - alpha)·c_div‖∞`: at and above this L1 coefficient the
/// quadratic-plus-linear part cannot beat `w = 0`, whose gradient there is the
/// linear coefficient alone.
pub fn lambda_max(s: &QuadraticSurrogate, alpha: f64) -> f64 {
    norm_inf(&s.combined_linear(alpha))
}

pub fn effective_lambda(s: &QuadraticSurrogate, alpha: f64, lambda: f64, scale: LambdaScale) -> f64 {
    match scale {
        LambdaScale::Relative => lambda * lambda_max(s, alpha),
        LambdaScale::Absolute => lambda,
    }
}

/// Solves the pruning program for an already-built surrogate.
pub fn fit_surrogate(
    s: &QuadraticSurrogate,
    alpha: f64,
    lambda: f64,
    options: &FitOptions,
) -> Result<FitResult, PipelineError> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(PipelineError::InvalidConfig(format!(
            "lambda {lambda} must be finite and nonnegative"
        )));
    }
    let eff = effective_lambda(s, alpha, lambda, options.lambda_scale);
    let (program, map) = build_pruning_socp_with(
        s,
        alpha,
        eff,
        PruningOptions {
            simplex: options.simplex,
        },
    )?;
    let sol = solve(&program, &options.solver)?;
    if sol.status != SolveStatus::Optimal {
        return Err(PipelineError::FitFailed { status: sol.status });
    }
    Ok(FitResult {
        weights: WeightVector::new(map.extract_weights(&sol.x))?,
        effective_lambda: eff,
        status: sol.status,
        iterations: sol.iterations,
        objective: sol.objective,
    })
}

/// Fits pruning weights on `(t, y)`, which should be the training samples only.
///
/// `ridge = None` uses the surrogate's default ridge.
pub fn fit_weights(
    t: &PredictionTensor,
    y: &LabelVector,
    alpha: f64,
    lambda: f64,
    anchor: &Anchor,
    ridge: Option<f64>,
    options: &FitOptions,
) -> Result<FitResult, PipelineError> {
    let anchor = anchor.resolve(t.num_models())?;
    let s = build_surrogate(t, y, &anchor, ridge)?;
    fit_surrogate(&s, alpha, lambda, options)
}
