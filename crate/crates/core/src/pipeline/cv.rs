//! Grid search over `(alpha, lambda)`.

use super::fit::{fit_surrogate, FitOptions};
use super::select::{accuracy, auto_threshold, default_candidates, prune_by_threshold, vote, DEFAULT_CANDIDATES};
use super::{PipelineError, PruneConfig, ThresholdRule};
use crate::conic::SolveStatus;
use crate::loss::build_surrogate;
use crate::types::{LabelVector, PredictionTensor, SplitSpec, WeightVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Outcome of one grid cell. Failed cells carry only their status.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellDiagnostics {
    pub alpha_index: usize,
    pub lambda_index: usize,
    pub alpha: f64,
    pub lambda: f64,
    pub effective_lambda: Option<f64>,
    pub status: SolveStatus,
    pub iterations: Option<usize>,
    pub weights: Option<WeightVector>,
    pub threshold: Option<f64>,
    pub selected: Option<Vec<usize>>,
    pub valid_accuracy: Option<f64>,
}

impl CellDiagnostics {
    fn succeeded(&self) -> bool {
        self.valid_accuracy.is_some()
    }

    fn num_selected(&self) -> usize {
        self.selected.as_ref().map_or(usize::MAX, Vec::len)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub best_alpha: f64,
    pub best_lambda: f64,
    /// Index into `cells`.
    pub best_cell: usize,
    /// Row-major over `(alpha_index, lambda_index)`.
    pub cells: Vec<CellDiagnostics>,
}

impl CvResult {
    pub fn best(&self) -> &CellDiagnostics {
        &self.cells[self.best_cell]
    }
}

/// Threshold choice on `samples` under the configured rule.
pub(crate) fn choose_threshold(
    w: &WeightVector,
    t: &PredictionTensor,
    y: &LabelVector,
    samples: &[usize],
    config: &PruneConfig,
) -> Result<(f64, Vec<usize>, f64), PipelineError> {
    match config.threshold {
        ThresholdRule::Auto => {
            let cands = default_candidates(w, DEFAULT_CANDIDATES);
            let c = auto_threshold(w, t, y, samples, &cands, config.vote)?;
            Ok((c.threshold, c.selected, c.accuracy))
        }
        ThresholdRule::Fixed(h) => {
            let selected = prune_by_threshold(w, h);
            let pred = vote(&t.select_samples(samples), &selected, config.vote, Some(w))?;
            let acc = accuracy(&pred, &y.select(samples))?;
            Ok((h, selected, acc))
        }
    }
}

/// Fits every grid cell on the train split and scores it on the validation
/// split. The best cell has the highest validation accuracy, then the fewest
/// selected models, then the lowest lambda index, then the lowest alpha index.
///
/// Cells run in parallel; the result does not depend on scheduling.
pub fn cross_validate(
    t: &PredictionTensor,
    y: &LabelVector,
    split: &SplitSpec,
    config: &PruneConfig,
) -> Result<CvResult, PipelineError> {
    config.validate()?;
    split.validate(t.num_samples())?;
    let train_t = t.select_samples(&split.train);
    let train_y = y.select(&split.train);
    let anchor = config.anchor.resolve(t.num_models())?;
    let surrogate = build_surrogate(&train_t, &train_y, &anchor, config.ridge)?;
    let options = FitOptions {
        simplex: config.simplex_mode,
        lambda_scale: config.lambda_scale,
        solver: config.solver.clone(),
    };

    let grid: Vec<(usize, usize)> = (0..config.alpha_grid.len())
        .flat_map(|a| (0..config.lambda_grid.len()).map(move |l| (a, l)))
        .collect();
    let cells: Vec<CellDiagnostics> = grid
        .par_iter()
        .map(|&(ai, li)| -> Result<CellDiagnostics, PipelineError> {
            let (alpha, lambda) = (config.alpha_grid[ai], config.lambda_grid[li]);
            let mut cell = CellDiagnostics {
                alpha_index: ai,
                lambda_index: li,
                alpha,
                lambda,
                effective_lambda: None,
                status: SolveStatus::Numerical,
                iterations: None,
                weights: None,
                threshold: None,
                selected: None,
                valid_accuracy: None,
            };
            match fit_surrogate(&surrogate, alpha, lambda, &options) {
                Ok(fit) => {
                    let (h, selected, acc) = choose_threshold(&fit.weights, t, y, &split.valid, config)?;
                    cell.effective_lambda = Some(fit.effective_lambda);
                    cell.status = fit.status;
                    cell.iterations = Some(fit.iterations);
                    cell.weights = Some(fit.weights);
                    cell.threshold = Some(h);
                    cell.selected = Some(selected);
                    cell.valid_accuracy = Some(acc);
                }
                Err(PipelineError::FitFailed { status }) => cell.status = status,
                Err(e) => return Err(e),
            }
            Ok(cell)
        })
        .collect::<Result<_, _>>()?;

    let best_cell = select_best(&cells).ok_or(PipelineError::AllCellsFailed)?;
    Ok(CvResult {
        best_alpha: cells[best_cell].alpha,
        best_lambda: cells[best_cell].lambda,
        best_cell,
        cells,
    })
}

/// Index of the winning cell among those that succeeded.
pub fn select_best(cells: &[CellDiagnostics]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (k, cell) in cells.iter().enumerate() {
        if !cell.succeeded() {
            continue;
        }
        let better = match best {
            None => true,
            Some(b) => {
                let cur = &cells[b];
                let (a, ca) = (cell.valid_accuracy.unwrap(), cur.valid_accuracy.unwrap());
                a > ca
                    || (a == ca
                        && (cell.num_selected(), cell.lambda_index, cell.alpha_index)
                            < (cur.num_selected(), cur.lambda_index, cur.alpha_index))
            }
        };
        if better {
            best = Some(k);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::synthetic::{generate_synthetic_ensemble, SyntheticSpec};

    fn data() -> crate::pipeline::synthetic::SyntheticEnsemble {
        generate_synthetic_ensemble(&SyntheticSpec::new(6, 500, 3, 21)).unwrap()
    }

    #[test]
    fn single_cell_grid() {
        let e = data();
        let config = PruneConfig {
            alpha_grid: vec![0.3],
            lambda_grid: vec![0.5],
            ..PruneConfig::default()
        };
        let r = cross_validate(&e.tensor, &e.labels, &e.split, &config).unwrap();
        assert_eq!((r.best_alpha, r.best_lambda, r.best_cell), (0.3, 0.5, 0));
        assert_eq!(r.cells.len(), 1);
    }

    #[test]
    fn equal_cells_pick_lowest_indices() {
        // Identical models: every cell votes identically on validation.
        let e = data();
        let t = e.tensor.select_models(&[2, 2, 2]);
        let config = PruneConfig {
            alpha_grid: vec![0.2, 0.4],
            lambda_grid: vec![0.3, 0.6],
            ..PruneConfig::default()
        };
        let r = cross_validate(&t, &e.labels, &e.split, &config).unwrap();
        assert!(r.cells.iter().all(|c| c.valid_accuracy == r.cells[0].valid_accuracy));
        let key = |c: &CellDiagnostics| (c.num_selected(), c.lambda_index, c.alpha_index);
        let expected = (0..r.cells.len()).min_by_key(|&k| key(&r.cells[k])).unwrap();
        assert_eq!(r.best_cell, expected);
    }

    #[test]
    fn matches_sequential_evaluation() {
        let e = data();
        let config = PruneConfig::default();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let serial = pool.install(|| cross_validate(&e.tensor, &e.labels, &e.split, &config).unwrap());
        let parallel = cross_validate(&e.tensor, &e.labels, &e.split, &config).unwrap();
        assert_eq!(serial, parallel);
    }

    fn cell(ai: usize, li: usize, acc: Option<f64>, selected: usize) -> CellDiagnostics {
        CellDiagnostics {
            alpha_index: ai,
            lambda_index: li,
            alpha: 0.1 * (ai + 1) as f64,
            lambda: 0.2 * (li + 1) as f64,
            effective_lambda: None,
            status: if acc.is_some() {
                SolveStatus::Optimal
            } else {
                SolveStatus::MaxIters
            },
            iterations: None,
            weights: None,
            threshold: None,
            selected: acc.map(|_| (0..selected).collect()),
            valid_accuracy: acc,
        }
    }

    #[test]
    fn selection_order() {
        // Accuracy first.
        let cells = vec![cell(0, 0, Some(0.7), 1), cell(0, 1, Some(0.8), 9), cell(1, 0, None, 1)];
        assert_eq!(select_best(&cells), Some(1));
        // Then fewer models, then lambda index, then alpha index.
        let cells = vec![
            cell(0, 1, Some(0.8), 3),
            cell(1, 0, Some(0.8), 3),
            cell(0, 0, Some(0.8), 4),
        ];
        assert_eq!(select_best(&cells), Some(1));
        let cells = vec![cell(1, 0, Some(0.8), 3), cell(0, 0, Some(0.8), 3)];
        assert_eq!(select_best(&cells), Some(1));
        assert_eq!(select_best(&[cell(0, 0, None, 0)]), None);
    }
}
