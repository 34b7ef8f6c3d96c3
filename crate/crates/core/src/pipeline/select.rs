//! Threshold pruning, voting and accuracy.

use super::PipelineError;
use crate::types::{argmax, LabelVector, PredictionTensor, WeightVector};
use serde::{Deserialize, Serialize};

/// Number of quantile candidates [`default_candidates`] produces.
pub const DEFAULT_CANDIDATES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VoteMode {
    /// Each member votes for its argmax class.
    #[default]
    Majority,
    /// `argmax_j Σ w_i p_ij` over the members.
    Weighted,
}

/// Models with `|w_i| ≥ h`, ascending. Never empty: when nothing survives,
/// the single largest-magnitude weight (lowest index on ties) is kept.
pub fn prune_by_threshold(w: &WeightVector, h: f64) -> Vec<usize> {
    let kept: Vec<usize> = (0..w.len()).filter(|&i| w[i].abs() >= h).collect();
    if !kept.is_empty() || w.is_empty() {
        return kept;
    }
    let mags: Vec<f64> = w.as_slice().iter().map(|v| v.abs()).collect();
    vec![argmax(&mags)]
}

/// Predicted labels of `members` on every sample of `t`.
///
/// `weights` is required for [`VoteMode::Weighted`] and ignored otherwise.
/// Ties go to the lowest class index.
pub fn vote(
    t: &PredictionTensor,
    members: &[usize],
    mode: VoteMode,
    weights: Option<&WeightVector>,
) -> Result<Vec<usize>, PipelineError> {
    if members.is_empty() {
        return Err(PipelineError::EmptyEnsemble);
    }
    if let Some(&i) = members.iter().find(|&&i| i >= t.num_models()) {
        return Err(PipelineError::ShapeMismatch(format!(
            "member {i} out of range for {} models",
            t.num_models()
        )));
    }
    let c = t.num_classes();
    let mut scores = vec![0.0; c];
    let mut out = Vec::with_capacity(t.num_samples());
    match mode {
        VoteMode::Majority => {
            for s in 0..t.num_samples() {
                scores.iter_mut().for_each(|v| *v = 0.0);
                for &i in members {
                    scores[t.argmax(i, s)] += 1.0;
                }
                out.push(argmax(&scores));
            }
        }
        VoteMode::Weighted => {
            let w = weights.ok_or_else(|| PipelineError::ShapeMismatch("weighted vote needs weights".into()))?;
            if w.len() != t.num_models() {
                return Err(PipelineError::ShapeMismatch(format!(
                    "{} weights for {} models",
                    w.len(),
                    t.num_models()
                )));
            }
            for s in 0..t.num_samples() {
                scores.iter_mut().for_each(|v| *v = 0.0);
                for &i in members {
                    for (acc, &p) in scores.iter_mut().zip(t.row(i, s)) {
                        *acc += w[i] * p;
                    }
                }
                out.push(argmax(&scores));
            }
        }
    }
    Ok(out)
}

fn hits(pred: &[usize], y: &[usize]) -> usize {
    pred.iter().zip(y).filter(|(a, b)| a == b).count()
}

/// Fraction of exact matches.
pub fn accuracy(pred: &[usize], y: &LabelVector) -> Result<f64, PipelineError> {
    if pred.len() != y.len() {
        return Err(PipelineError::ShapeMismatch(format!(
            "{} predictions for {} labels",
            pred.len(),
            y.len()
        )));
    }
    if pred.is_empty() {
        return Ok(0.0);
    }
    Ok(hits(pred, y.labels()) as f64 / pred.len() as f64)
}

/// Lower empirical quantiles of `|w|` at levels `k / count`, deduplicated, ascending.
pub fn default_candidates(w: &WeightVector, count: usize) -> Vec<f64> {
    let mut mags: Vec<f64> = w.as_slice().iter().map(|v| v.abs()).collect();
    mags.sort_by(f64::total_cmp);
    if mags.is_empty() {
        return vec![0.0];
    }
    let mut out: Vec<f64> = (0..count.max(1))
        .map(|k| mags[(k * mags.len()) / count.max(1)])
        .collect();
    out.dedup();
    out
}

/// Outcome of a threshold search.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdChoice {
    pub threshold: f64,
    pub selected: Vec<usize>,
    pub accuracy: f64,
}

/// Picks the candidate whose pruned ensemble votes most accurately on `samples`
/// (ties go to the larger threshold). An empty candidate list falls back to
/// [`default_candidates`].
pub fn auto_threshold(
    w: &WeightVector,
    t: &PredictionTensor,
    y: &LabelVector,
    samples: &[usize],
    candidates: &[f64],
    mode: VoteMode,
) -> Result<ThresholdChoice, PipelineError> {
    if w.len() != t.num_models() {
        return Err(PipelineError::ShapeMismatch(format!(
            "{} weights for {} models",
            w.len(),
            t.num_models()
        )));
    }
    let sub_t = t.select_samples(samples);
    let sub_y = y.select(samples);
    let fallback;
    let candidates = if candidates.is_empty() {
        fallback = default_candidates(w, DEFAULT_CANDIDATES);
        &fallback[..]
    } else {
        candidates
    };
    let mut best: Option<(usize, f64, Vec<usize>)> = None;
    for &h in candidates {
        let selected = prune_by_threshold(w, h);
        let pred = vote(&sub_t, &selected, mode, Some(w))?;
        let count = hits(&pred, sub_y.labels());
        let better = match &best {
            None => true,
            Some((bc, bh, _)) => count > *bc || (count == *bc && h > *bh),
        };
        if better {
            best = Some((count, h, selected));
        }
    }
    let (count, threshold, selected) = best.expect("at least one candidate");
    Ok(ThresholdChoice {
        threshold,
        selected,
        accuracy: if samples.is_empty() {
            0.0
        } else {
            count as f64 / samples.len() as f64
        },
    })
}
