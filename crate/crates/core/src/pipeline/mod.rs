//! End-to-end pruning: fit on train, choose `(alpha, lambda)` and the
//! threshold on validation, evaluate full and pruned ensembles on test.

pub mod cv;
pub mod fit;
pub mod oracle;
pub mod select;
pub mod synthetic;

pub use cv::{cross_validate, CellDiagnostics, CvResult};
pub use fit::{effective_lambda, fit_surrogate, fit_weights, lambda_max, FitOptions, FitResult, LambdaScale};
pub use oracle::{brute_force_subset_oracle, subset_loss, OracleResult, MAX_ORACLE_MODELS};
pub use select::{accuracy, auto_threshold, default_candidates, prune_by_threshold, vote, ThresholdChoice, VoteMode};
pub use synthetic::{generate_synthetic_ensemble, SyntheticEnsemble, SyntheticSpec};

use crate::conic::{ConicError, SolveStatus};
use crate::io::IoError;
use crate::loss::LossError;
use crate::solver::{SolverError, SolverSettings};
use crate::types::{LabelVector, PredictionTensor, SplitSpec, ValidationError, WeightVector};
use serde::{Deserialize, Serialize};
use std::path::PathBuf;
use thiserror::Error;

/// Version tag written into every report.
pub const REPORT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("cannot vote with an empty ensemble")]
    EmptyEnsemble,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("weight fit failed: solver status {status}")]
    FitFailed { status: SolveStatus },
    #[error("every grid cell failed to fit")]
    AllCellsFailed,
    #[error("{models} models is too many for exhaustive search (max {max})")]
    TooLarge { models: usize, max: usize },
    #[error(transparent)]
    Validation(#[from] ValidationError),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Conic(#[from] ConicError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<PipelineError>,
    },
}

impl PipelineError {
    pub fn context(self, context: impl Into<String>) -> Self {
        PipelineError::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// The innermost error, with context layers stripped.
    pub fn root(&self) -> &PipelineError {
        match self {
            PipelineError::Context { source, .. } => source.root(),
            other => other,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdRule {
    /// Best of the quantile candidates on the validation split.
    Auto,
    Fixed(f64),
}

/// Linearization point of the diversity term.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Anchor {
    #[default]
    Uniform,
    Weights(WeightVector),
}

impl Anchor {
    pub fn resolve(&self, num_models: usize) -> Result<WeightVector, PipelineError> {
        match self {
            Anchor::Uniform => Ok(WeightVector::uniform(num_models)),
            Anchor::Weights(w) if w.len() == num_models => Ok(w.clone()),
            Anchor::Weights(w) => Err(PipelineError::ShapeMismatch(format!(
                "anchor has {} weights for {num_models} models",
                w.len()
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneConfig {
    pub alpha_grid: Vec<f64>,
    pub lambda_grid: Vec<f64>,
    pub threshold: ThresholdRule,
    pub anchor: Anchor,
    pub seed: u64,
    pub simplex_mode: bool,
    pub lambda_scale: LambdaScale,
    pub vote: VoteMode,
    /// `None` uses the surrogate's default ridge.
    pub ridge: Option<f64>,
    pub solver: SolverSettings,
}

impl Default for PruneConfig {
    fn default() -> Self {
        Self {
            alpha_grid: vec![0.1, 0.2, 0.3, 0.4, 0.5],
            lambda_grid: vec![0.1, 0.3, 0.5, 0.7, 0.9],
            threshold: ThresholdRule::Auto,
            anchor: Anchor::Uniform,
            seed: 0,
            simplex_mode: false,
            lambda_scale: LambdaScale::Relative,
            vote: VoteMode::Majority,
            ridge: None,
            solver: SolverSettings::default(),
        }
    }
}

impl PruneConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |msg: String| Err(PipelineError::InvalidConfig(msg));
        if self.alpha_grid.is_empty() || self.lambda_grid.is_empty() {
            return bad("alpha and lambda grids must be non-empty".into());
        }
        if let Some(a) = self.alpha_grid.iter().find(|a| !(0.0..=1.0).contains(*a)) {
            return bad(format!("alpha {a} is outside [0, 1]"));
        }
        if let Some(l) = self.lambda_grid.iter().find(|l| !(**l >= 0.0 && l.is_finite())) {
            return bad(format!("lambda {l} must be finite and nonnegative"));
        }
        if let ThresholdRule::Fixed(h) = self.threshold {
            if !(h >= 0.0 && h.is_finite()) {
                return bad(format!("threshold {h} must be finite and nonnegative"));
            }
        }
        if let Some(r) = self.ridge {
            if !(r >= 0.0 && r.is_finite()) {
                return bad(format!("ridge {r} must be finite and nonnegative"));
            }
        }
        self.solver.validate()?;
        Ok(())
    }
}

/// Predictions, labels and split, validated together.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub tensor: PredictionTensor,
    pub labels: LabelVector,
    pub split: SplitSpec,
}

impl Dataset {
    pub fn new(tensor: PredictionTensor, labels: LabelVector, split: SplitSpec) -> Result<Self, PipelineError> {
        if labels.len() != tensor.num_samples() || labels.num_classes() != tensor.num_classes() {
            return Err(PipelineError::ShapeMismatch(format!(
                "labels ({} samples, {} classes) do not match tensor ({} samples, {} classes)",
                labels.len(),
                labels.num_classes(),
                tensor.num_samples(),
                tensor.num_classes()
            )));
        }
        split.validate(tensor.num_samples())?;
        Ok(Self { tensor, labels, split })
    }
}

pub enum DataSource {
    Synthetic(SyntheticSpec),
    /// Path to a prediction manifest (see [`crate::io`]).
    Manifest(PathBuf),
    InMemory(Dataset),
}

impl DataSource {
    pub fn load(self) -> Result<Dataset, PipelineError> {
        match self {
            DataSource::Synthetic(spec) => {
                let e = generate_synthetic_ensemble(&spec)?;
                Dataset::new(e.tensor, e.labels, e.split)
            }
            DataSource::Manifest(path) => {
                let (tensor, labels, split) = crate::io::read_predictions(&path)?;
                Dataset::new(tensor, labels, split)
            }
            DataSource::InMemory(d) => Ok(d),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneReport {
    pub format_version: u32,
    pub seed: u64,
    pub best_alpha: f64,
    pub best_lambda: f64,
    pub effective_lambda: f64,
    pub threshold_used: f64,
    pub vote: VoteMode,
    pub lambda_scale: LambdaScale,
    pub simplex_mode: bool,
    pub weights: WeightVector,
    pub selected: Vec<usize>,
    /// Test-split accuracies.
    pub full_accuracy: f64,
    pub pruned_accuracy: f64,
    pub num_models_full: usize,
    pub num_models_pruned: usize,
    pub cells: Vec<CellDiagnostics>,
}

/// Runs the whole procedure on `source`.
pub fn run_pipeline(source: DataSource, config: &PruneConfig) -> Result<PruneReport, PipelineError> {
    let data = source.load().map_err(|e| e.context("loading data"))?;
    run_on_dataset(&data, config)
}

pub fn run_on_dataset(data: &Dataset, config: &PruneConfig) -> Result<PruneReport, PipelineError> {
    config.validate()?;
    let cv =
        cross_validate(&data.tensor, &data.labels, &data.split, config).map_err(|e| e.context("cross-validation"))?;
    let best = cv.best();
    let weights = best.weights.clone().expect("successful cell has weights");
    let selected = best.selected.clone().expect("successful cell has a selection");

    let test_t = data.tensor.select_samples(&data.split.test);
    let test_y = data.labels.select(&data.split.test);
    let m = data.tensor.num_models();
    let all: Vec<usize> = (0..m).collect();
    let evaluate = |members: &[usize], w: &WeightVector| -> Result<f64, PipelineError> {
        accuracy(&vote(&test_t, members, config.vote, Some(w))?, &test_y)
    };
    let full_accuracy = evaluate(&all, &WeightVector::uniform(m)).map_err(|e| e.context("evaluating full ensemble"))?;
    let pruned_accuracy = evaluate(&selected, &weights).map_err(|e| e.context("evaluating pruned ensemble"))?;

    Ok(PruneReport {
        format_version: REPORT_FORMAT_VERSION,
        seed: config.seed,
        best_alpha: cv.best_alpha,
        best_lambda: cv.best_lambda,
        effective_lambda: best.effective_lambda.unwrap_or(0.0),
        threshold_used: best.threshold.unwrap_or(0.0),
        vote: config.vote,
        lambda_scale: config.lambda_scale,
        simplex_mode: config.simplex_mode,
        num_models_full: m,
        num_models_pruned: selected.len(),
        weights,
        selected,
        full_accuracy,
        pruned_accuracy,
        cells: cv.cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_matches_grids() {
        let c = PruneConfig::default();
        assert_eq!(c.alpha_grid, vec![0.1, 0.2, 0.3, 0.4, 0.5]);
        assert_eq!(c.lambda_grid, vec![0.1, 0.3, 0.5, 0.7, 0.9]);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn config_validation() {
        let ok = PruneConfig::default();
        for bad in [
            PruneConfig {
                alpha_grid: vec![],
                ..ok.clone()
            },
            PruneConfig {
                alpha_grid: vec![1.5],
                ..ok.clone()
            },
            PruneConfig {
                lambda_grid: vec![-0.1],
                ..ok.clone()
            },
            PruneConfig {
                threshold: ThresholdRule::Fixed(-1.0),
                ..ok.clone()
            },
            PruneConfig {
                ridge: Some(f64::NAN),
                ..ok.clone()
            },
        ] {
            assert!(bad.validate().is_err());
        }
    }

    #[test]
    fn identical_models_prune_without_loss() {
        let e = generate_synthetic_ensemble(&SyntheticSpec::new(2, 300, 3, 5)).unwrap();
        let t = e.tensor.select_models(&[1, 1, 1, 1]);
        let data = Dataset::new(t, e.labels, e.split).unwrap();
        let r = run_on_dataset(&data, &PruneConfig::default()).unwrap();
        assert_eq!(r.pruned_accuracy, r.full_accuracy);
        assert!(r.num_models_pruned <= r.num_models_full);
    }

    #[test]
    fn synthetic_run_is_deterministic() {
        let spec = SyntheticSpec::new(8, 400, 4, 17);
        let config = PruneConfig {
            seed: 17,
            ..PruneConfig::default()
        };
        let a = run_pipeline(DataSource::Synthetic(spec.clone()), &config).unwrap();
        let b = run_pipeline(DataSource::Synthetic(spec), &config).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert_eq!(a.num_models_pruned, a.selected.len());
        assert!(a.selected.iter().all(|&i| i < 8));
    }

    #[test]
    fn errors_keep_context() {
        let spec = SyntheticSpec::new(1, 10, 2, 0);
        let err = run_pipeline(DataSource::Synthetic(spec), &PruneConfig::default()).unwrap_err();
        assert!(matches!(err.root(), PipelineError::InvalidSpec(_)));
        assert!(err.to_string().starts_with("loading data: "));
    }
}
