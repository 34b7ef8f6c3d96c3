//! Exhaustive subset search, feasible for small ensembles only.

use super::PipelineError;
use crate::loss::exact_loss;
use crate::types::{LabelVector, PredictionTensor, WeightVector};
use rayon::prelude::*;

pub const MAX_ORACLE_MODELS: usize = 14;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    /// Ascending model indices.
    pub subset: Vec<usize>,
    pub loss: f64,
    pub subsets_evaluated: usize,
}

/// Exact loss of the uniform-weight ensemble over `members`.
pub fn subset_loss(t: &PredictionTensor, y: &LabelVector, members: &[usize], alpha: f64) -> Result<f64, PipelineError> {
    let w = WeightVector::uniform_over(t.num_models(), members);
    Ok(exact_loss(&w, t, y, alpha)?.total)
}

/// Minimizes the exact loss over all non-empty uniform-weight subsets.
/// Ties go to the lexicographically smallest subset.
pub fn brute_force_subset_oracle(
    t: &PredictionTensor,
    y: &LabelVector,
    alpha: f64,
) -> Result<OracleResult, PipelineError> {
    let m = t.num_models();
    if m > MAX_ORACLE_MODELS {
        return Err(PipelineError::TooLarge {
            models: m,
            max: MAX_ORACLE_MODELS,
        });
    }
    let subsets: Vec<Vec<usize>> = (1u32..(1 << m))
        .map(|mask| (0..m).filter(|&i| mask & (1 << i) != 0).collect())
        .collect();
    let losses: Vec<f64> = subsets
        .par_iter()
        .map(|s| subset_loss(t, y, s, alpha))
        .collect::<Result<_, _>>()?;
    let mut best = 0;
    for k in 1..subsets.len() {
        if losses[k] < losses[best] || (losses[k] == losses[best] && subsets[k] < subsets[best]) {
            best = k;
        }
    }
    Ok(OracleResult {
        subset: subsets[best].clone(),
        loss: losses[best],
        subsets_evaluated: subsets.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::synthetic::{generate_synthetic_ensemble, SyntheticSpec};

    #[test]
    fn enumerates_all_subsets() {
        let e = generate_synthetic_ensemble(&SyntheticSpec::new(3, 30, 2, 1)).unwrap();
        let r = brute_force_subset_oracle(&e.tensor, &e.labels, 0.5).unwrap();
        assert_eq!(r.subsets_evaluated, 7);
    }

    #[test]
    fn perfect_model_wins_at_alpha_one() {
        let y = LabelVector::new(vec![0, 1, 1, 0], 2).unwrap();
        let perfect: Vec<Vec<f64>> = y
            .labels()
            .iter()
            .map(|&l| if l == 0 { vec![1.0, 0.0] } else { vec![0.0, 1.0] })
            .collect();
        let noisy = vec![vec![0.6, 0.4], vec![0.3, 0.7], vec![0.8, 0.2], vec![0.5, 0.5]];
        let t = PredictionTensor::from_nested(&[noisy.clone(), perfect, noisy]).unwrap();
        let r = brute_force_subset_oracle(&t, &y, 1.0).unwrap();
        assert_eq!(r.subset, vec![1]);
        assert!(r.loss.abs() < 1e-15);
    }

    #[test]
    fn ties_go_to_lexicographically_smallest() {
        let row = vec![vec![0.7, 0.3], vec![0.2, 0.8]];
        let t = PredictionTensor::from_nested(&[row.clone(), row]).unwrap();
        let y = LabelVector::new(vec![0, 1], 2).unwrap();
        let r = brute_force_subset_oracle(&t, &y, 1.0).unwrap();
        assert_eq!(r.subset, vec![0]);
    }

    #[test]
    fn too_large_rejected() {
        let e = generate_synthetic_ensemble(&SyntheticSpec::new(15, 5, 2, 1)).unwrap();
        assert!(matches!(
            brute_force_subset_oracle(&e.tensor, &e.labels, 0.5),
            Err(PipelineError::TooLarge { models: 15, .. })
        ));
    }
}
