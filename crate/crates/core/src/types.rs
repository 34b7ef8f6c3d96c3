//! Shared domain types: prediction tensors, labels, weights and data splits.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance on the sum of a probability row.
pub const ROW_SUM_TOL: f64 = 1e-9;

/// Violations of the [`PredictionTensor`] / [`LabelVector`] / [`SplitSpec`] invariants.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValidationError {
    #[error("probability row (model {model}, sample {sample}) does not sum to 1 (sum = {sum})")]
    RowNotNormalized { model: usize, sample: usize, sum: f64 },
    #[error("probability (model {model}, sample {sample}, class {class}) = {value} is outside [0, 1]")]
    OutOfRange {
        model: usize,
        sample: usize,
        class: usize,
        value: f64,
    },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("label {label} at sample {sample} is not in [0, {num_classes})")]
    LabelOutOfRange {
        sample: usize,
        label: usize,
        num_classes: usize,
    },
    #[error("weight {index} is not finite")]
    NonFiniteWeight { index: usize },
    #[error("split index {index} is out of range for {num_samples} samples")]
    SplitOutOfRange { index: usize, num_samples: usize },
    #[error("split index {index} appears more than once")]
    SplitOverlap { index: usize },
}

/// Per-model, per-sample class probabilities, stored densely as `(model, sample, class)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionTensor {
    num_models: usize,
    num_samples: usize,
    num_classes: usize,
    probs: Vec<f64>,
}

impl PredictionTensor {
    /// Wraps a raw buffer, checking only the extents.
    ///
    /// Use [`validate_tensor`] (or [`PredictionTensor::new`]) to check the
    /// probability invariants.
    pub fn from_raw(
        num_models: usize,
        num_samples: usize,
        num_classes: usize,
        probs: Vec<f64>,
    ) -> Result<Self, ValidationError> {
        if num_models == 0 || num_samples == 0 {
            return Err(ValidationError::ShapeMismatch(
                "tensor needs at least one model and one sample".into(),
            ));
        }
        if num_classes < 2 {
            return Err(ValidationError::ShapeMismatch(format!(
                "need at least 2 classes, got {num_classes}"
            )));
        }
        let expected = num_models
            .checked_mul(num_samples)
            .and_then(|v| v.checked_mul(num_classes))
            .ok_or_else(|| ValidationError::ShapeMismatch("tensor extent overflows".into()))?;
        if probs.len() != expected {
            return Err(ValidationError::ShapeMismatch(format!(
                "expected {expected} probabilities for {num_models}x{num_samples}x{num_classes}, got {}",
                probs.len()
            )));
        }
        Ok(Self {
            num_models,
            num_samples,
            num_classes,
            probs,
        })
    }

    /// Validated constructor. Rows within [`ROW_SUM_TOL`] of unit sum are renormalized.
    pub fn new(
        num_models: usize,
        num_samples: usize,
        num_classes: usize,
        probs: Vec<f64>,
    ) -> Result<Self, ValidationError> {
        let mut t = Self::from_raw(num_models, num_samples, num_classes, probs)?;
        validate_tensor(&t)?;
        t.renormalize_rows();
        Ok(t)
    }

    /// Builds a tensor from nested `[model][sample][class]` rows.
    pub fn from_nested(rows: &[Vec<Vec<f64>>]) -> Result<Self, ValidationError> {
        let m = rows.len();
        let n = rows.first().map_or(0, Vec::len);
        let c = rows.first().and_then(|r| r.first()).map_or(0, Vec::len);
        for (i, model) in rows.iter().enumerate() {
            if model.len() != n {
                return Err(ValidationError::ShapeMismatch(format!(
                    "model {i} has {} samples, expected {n}",
                    model.len()
                )));
            }
            for (s, row) in model.iter().enumerate() {
                if row.len() != c {
                    return Err(ValidationError::ShapeMismatch(format!(
                        "row (model {i}, sample {s}) has {} classes, expected {c}",
                        row.len()
                    )));
                }
            }
        }
        let probs = rows.iter().flatten().flatten().copied().collect();
        Self::new(m, n, c, probs)
    }

    fn renormalize_rows(&mut self) {
        let c = self.num_classes;
        for row in self.probs.chunks_mut(c) {
            let s: f64 = crate::numeric::sum(row.iter().copied());
            if s != 1.0 && s > 0.0 {
                row.iter_mut().for_each(|p| *p /= s);
            }
        }
    }

    pub fn num_models(&self) -> usize {
        self.num_models
    }

    pub fn num_samples(&self) -> usize {
        self.num_samples
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    #[inline]
    fn offset(&self, model: usize, sample: usize) -> usize {
        (model * self.num_samples + sample) * self.num_classes
    }

    /// Probability row of `model` on `sample`.
    #[inline]
    pub fn row(&self, model: usize, sample: usize) -> &[f64] {
        let o = self.offset(model, sample);
        &self.probs[o..o + self.num_classes]
    }

    #[inline]
    pub fn prob(&self, model: usize, sample: usize, class: usize) -> f64 {
        self.probs[self.offset(model, sample) + class]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    /// Predicted class (argmax, lowest index on ties) of `model` on `sample`.
    pub fn argmax(&self, model: usize, sample: usize) -> usize {
        argmax(self.row(model, sample))
    }

    /// Restricts the tensor to the given samples, in the given order.
    pub fn select_samples(&self, samples: &[usize]) -> PredictionTensor {
        let mut probs = Vec::with_capacity(self.num_models * samples.len() * self.num_classes);
        for i in 0..self.num_models {
            for &s in samples {
                probs.extend_from_slice(self.row(i, s));
            }
        }
        PredictionTensor {
            num_models: self.num_models,
            num_samples: samples.len(),
            num_classes: self.num_classes,
            probs,
        }
    }

    /// Restricts the tensor to the given models, in the given order.
    pub fn select_models(&self, models: &[usize]) -> PredictionTensor {
        let block = self.num_samples * self.num_classes;
        let mut probs = Vec::with_capacity(models.len() * block);
        for &i in models {
            probs.extend_from_slice(&self.probs[i * block..(i + 1) * block]);
        }
        PredictionTensor {
            num_models: models.len(),
            num_samples: self.num_samples,
            num_classes: self.num_classes,
            probs,
        }
    }
}

/// Index of the largest entry, lowest index on ties.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (j, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = j;
        }
    }
    best
}

/// Checks every [`PredictionTensor`] invariant, reporting the first offending index.
///
/// Rows are scanned in `(model, sample)` order; within a row, entry ranges are
/// checked before the row sum.
pub fn validate_tensor(t: &PredictionTensor) -> Result<(), ValidationError> {
    let expected = t.num_models * t.num_samples * t.num_classes;
    if t.probs.len() != expected || t.num_classes < 2 || t.num_models == 0 || t.num_samples == 0 {
        return Err(ValidationError::ShapeMismatch(format!(
            "buffer of {} does not match {}x{}x{}",
            t.probs.len(),
            t.num_models,
            t.num_samples,
            t.num_classes
        )));
    }
    for model in 0..t.num_models {
        for sample in 0..t.num_samples {
            let row = t.row(model, sample);
            for (class, &value) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(&value) {
                    return Err(ValidationError::OutOfRange {
                        model,
                        sample,
                        class,
                        value,
                    });
                }
            }
            let sum = crate::numeric::sum(row.iter().copied());
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(ValidationError::RowNotNormalized { model, sample, sum });
            }
        }
    }
    Ok(())
}

/// Ground-truth class indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelVector {
    labels: Vec<usize>,
    num_classes: usize,
}

impl LabelVector {
    pub fn new(labels: Vec<usize>, num_classes: usize) -> Result<Self, ValidationError> {
        if let Some((sample, &label)) = labels.iter().enumerate().find(|(_, &l)| l >= num_classes) {
            return Err(ValidationError::LabelOutOfRange {
                sample,
                label,
                num_classes,
            });
        }
        Ok(Self { labels, num_classes })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    #[inline]
    pub fn label(&self, sample: usize) -> usize {
        self.labels[sample]
    }

    /// One-hot indicator of the true class.
    #[inline]
    pub fn one_hot(&self, sample: usize, class: usize) -> f64 {
        if self.labels[sample] == class {
            1.0
        } else {
            0.0
        }
    }

    pub fn select(&self, samples: &[usize]) -> LabelVector {
        LabelVector {
            labels: samples.iter().map(|&s| self.labels[s]).collect(),
            num_classes: self.num_classes,
        }
    }
}

/// Ensemble member weights. Finite, but neither sign- nor simplex-constrained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(w: Vec<f64>) -> Result<Self, ValidationError> {
        if let Some(index) = w.iter().position(|v| !v.is_finite()) {
            return Err(ValidationError::NonFiniteWeight { index });
        }
        Ok(Self(w))
    }

    /// `1/m` in every coordinate.
    pub fn uniform(m: usize) -> Self {
        Self(vec![1.0 / m as f64; m])
    }

    /// Uniform weights over `members`, zero elsewhere.
    pub fn uniform_over(m: usize, members: &[usize]) -> Self {
        let mut w = vec![0.0; m];
        let share = 1.0 / members.len() as f64;
        for &i in members {
            w[i] = share;
        }
        Self(w)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn l1_norm(&self) -> f64 {
        self.0.iter().map(|v| v.abs()).sum()
    }
}

impl std::ops::Index<usize> for WeightVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Disjoint train / validation / test sample index sets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: Vec<usize>,
    pub valid: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitSpec {
    pub fn new(
        train: Vec<usize>,
        valid: Vec<usize>,
        test: Vec<usize>,
        num_samples: usize,
    ) -> Result<Self, ValidationError> {
        let split = Self { train, valid, test };
        split.validate(num_samples)?;
        Ok(split)
    }

    /// Contiguous blocks: the first `train_frac` of samples, then `valid_frac`, then the rest.
    pub fn contiguous(num_samples: usize, train_frac: f64, valid_frac: f64) -> Self {
        let n_train = ((num_samples as f64) * train_frac).round() as usize;
        let n_valid = ((num_samples as f64) * valid_frac).round() as usize;
        let n_train = n_train.min(num_samples);
        let n_valid = n_valid.min(num_samples - n_train);
        Self {
            train: (0..n_train).collect(),
            valid: (n_train..n_train + n_valid).collect(),
            test: (n_train + n_valid..num_samples).collect(),
        }
    }

    /// The 60/20/20 default split.
    pub fn default_for(num_samples: usize) -> Self {
        Self::contiguous(num_samples, 0.6, 0.2)
    }

    pub fn validate(&self, num_samples: usize) -> Result<(), ValidationError> {
        let mut seen = vec![false; num_samples];
        for &index in self.train.iter().chain(&self.valid).chain(&self.test) {
            if index >= num_samples {
                return Err(ValidationError::SplitOutOfRange { index, num_samples });
            }
            if std::mem::replace(&mut seen[index], true) {
                return Err(ValidationError::SplitOverlap { index });
            }
        }
        Ok(())
    }
}
