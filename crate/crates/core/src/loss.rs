//! Ensemble loss with an entropy diversity term, and its convex quadratic surrogate.
//!
//! For weights `w`, the weighted ensemble row on sample `n` is
//! `f(n) = Σ_i w_i p_i(n)`. The loss averages two per-sample terms:
//!
//! * accuracy: `(1/C) Σ_j (f_j(n) - y_j(n))²`
//! * diversity: `1 - (1/C) Σ_j [ H(f_j(n)) - Σ_i w_i H(p_ij(n)) ]`, with `H(z) = -z ln z`
//!
//! and combines them as `alpha * accuracy + (1 - alpha) * diversity`.
//!
//! The accuracy term is an exact quadratic form in `w`. The diversity term is
//! linearized at an anchor weight vector, giving the surrogate
//! `wᵀQw + q_linᵀw + constant` plus the linear diversity part `c_divᵀw`.

use crate::numeric::{dot, CompensatedSum, DenseMatrix};
use crate::types::{LabelVector, PredictionTensor, WeightVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Slack allowed outside `[0, 1]` for a single entropy argument.
pub const ENTROPY_SLACK: f64 = 1e-12;
/// Slack allowed outside `[0, 1]` for a mixed ensemble probability.
pub const MIXTURE_SLACK: f64 = 1e-9;
/// Lower clamp applied to the anchor mixture inside the diversity gradient's logarithm.
pub const LOG_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LossError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
}

/// `-z ln z`, extended continuously by 0 at `z = 0`.
pub fn entropy_term(z: f64) -> Result<f64, LossError> {
    if !(-ENTROPY_SLACK..=1.0 + ENTROPY_SLACK).contains(&z) {
        return Err(LossError::Domain(format!("entropy argument {z} is outside [0, 1]")));
    }
    Ok(h(z.clamp(0.0, 1.0)))
}

#[inline]
fn h(z: f64) -> f64 {
    if z > 0.0 {
        -z * z.ln()
    } else {
        0.0
    }
}

/// Shannon entropy (natural log) of a probability row.
pub fn distribution_entropy(p: &[f64]) -> Result<f64, LossError> {
    let s: f64 = crate::numeric::sum(p.iter().copied());
    if p.is_empty() || (s - 1.0).abs() > crate::types::ROW_SUM_TOL {
        return Err(LossError::Domain(format!("row sums to {s}, not 1")));
    }
    let mut acc = CompensatedSum::new();
    for &z in p {
        acc.add(entropy_term(z)?);
    }
    Ok(acc.value())
}

/// Weighted ensemble row `Σ_i w_i p_i(n)`, without renormalization.
pub fn ensemble_prediction(w: &WeightVector, t: &PredictionTensor, sample: usize) -> Result<Vec<f64>, LossError> {
    check_weights(w, t)?;
    if sample >= t.num_samples() {
        return Err(LossError::ShapeMismatch(format!(
            "sample {sample} out of range for {} samples",
            t.num_samples()
        )));
    }
    Ok(mixture(w.as_slice(), t, sample))
}

fn mixture(w: &[f64], t: &PredictionTensor, sample: usize) -> Vec<f64> {
    let mut row = vec![0.0; t.num_classes()];
    for (i, &wi) in w.iter().enumerate() {
        if wi == 0.0 {
            continue;
        }
        for (r, &p) in row.iter_mut().zip(t.row(i, sample)) {
            *r += wi * p;
        }
    }
    row
}

fn check_weights(w: &WeightVector, t: &PredictionTensor) -> Result<(), LossError> {
    if w.len() != t.num_models() {
        return Err(LossError::ShapeMismatch(format!(
            "{} weights for {} models",
            w.len(),
            t.num_models()
        )));
    }
    Ok(())
}

fn check_labels(t: &PredictionTensor, y: &LabelVector) -> Result<(), LossError> {
    if y.len() != t.num_samples() || y.num_classes() != t.num_classes() {
        return Err(LossError::ShapeMismatch(format!(
            "labels ({} samples, {} classes) do not match tensor ({} samples, {} classes)",
            y.len(),
            y.num_classes(),
            t.num_samples(),
            t.num_classes()
        )));
    }
    Ok(())
}

/// Decomposed ensemble loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossValue {
    pub total: f64,
    pub accuracy_term: f64,
    pub diversity_term: f64,
    pub alpha: f64,
}

impl LossValue {
    fn combine(accuracy_term: f64, diversity_term: f64, alpha: f64) -> Self {
        Self {
            total: alpha * accuracy_term + (1.0 - alpha) * diversity_term,
            accuracy_term,
            diversity_term,
            alpha,
        }
    }
}

/// Sample-averaged ensemble loss at weights `w`.
///
/// Mixture probabilities outside `[0, 1]` by more than [`MIXTURE_SLACK`]
/// are reported as [`LossError::Domain`] rather than clamped; this can only
/// happen for weights off the probability simplex.
pub fn exact_loss(w: &WeightVector, t: &PredictionTensor, y: &LabelVector, alpha: f64) -> Result<LossValue, LossError> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(LossError::Domain(format!("alpha = {alpha} is outside [0, 1]")));
    }
    check_weights(w, t)?;
    check_labels(t, y)?;

    let c = t.num_classes();
    let inv_c = 1.0 / c as f64;
    let weights = w.as_slice();
    let mut acc_sum = CompensatedSum::new();
    let mut div_sum = CompensatedSum::new();

    for n in 0..t.num_samples() {
        let f = mixture(weights, t, n);
        let mut sq = 0.0;
        let mut bracket = 0.0;
        for (j, &fj) in f.iter().enumerate() {
            let d = fj - y.one_hot(n, j);
            sq += d * d;
            if !(-MIXTURE_SLACK..=1.0 + MIXTURE_SLACK).contains(&fj) {
                return Err(LossError::Domain(format!(
                    "ensemble probability {fj} (sample {n}, class {j}) is outside [0, 1]"
                )));
            }
            let member: f64 = weights.iter().enumerate().map(|(i, &wi)| wi * h(t.prob(i, n, j))).sum();
            bracket += h(fj.clamp(0.0, 1.0)) - member;
        }
        acc_sum.add(sq * inv_c);
        div_sum.add(1.0 - bracket * inv_c);
    }

    let n = t.num_samples() as f64;
    Ok(LossValue::combine(acc_sum.value() / n, div_sum.value() / n, alpha))
}

/// Convex quadratic model of the ensemble loss in the weight vector.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticSurrogate {
    /// Accuracy Gram matrix, with `ridge` already on its diagonal.
    pub q: DenseMatrix,
    /// Linear part of the accuracy term.
    pub q_lin: Vec<f64>,
    /// Gradient of the diversity term at the anchor.
    pub c_div: Vec<f64>,
    /// Constant part of the accuracy term.
    pub constant: f64,
    pub ridge: f64,
}

impl QuadraticSurrogate {
    pub fn num_models(&self) -> usize {
        self.q_lin.len()
    }

    /// `wᵀQw + q_linᵀw + constant`, with the ridge included.
    pub fn quadratic_value(&self, w: &[f64]) -> f64 {
        self.q.quad_form(w) + dot(&self.q_lin, w) + self.constant
    }

    /// The accuracy term (ridge removed), exact for any `w`.
    pub fn accuracy_term(&self, w: &[f64]) -> f64 {
        self.quadratic_value(w) - self.ridge * dot(w, w)
    }

    /// Combined linear coefficient `alpha * q_lin + (1 - alpha) * c_div`.
    pub fn combined_linear(&self, alpha: f64) -> Vec<f64> {
        self.q_lin
            .iter()
            .zip(&self.c_div)
            .map(|(a, d)| alpha * a + (1.0 - alpha) * d)
            .collect()
    }

    /// Pruning objective `alpha·wᵀQw + combined_linearᵀw + lambda‖w‖₁`, constants dropped.
    pub fn pruning_objective(&self, w: &[f64], alpha: f64, lambda: f64) -> f64 {
        let l1: f64 = w.iter().map(|v| v.abs()).sum();
        alpha * self.q.quad_form(w) + dot(&self.combined_linear(alpha), w) + lambda * l1
    }
}

/// Ridge used when none is given: `1e-8 · trace(Q) / M`.
pub fn default_ridge(q: &DenseMatrix) -> f64 {
    1e-8 * q.trace() / q.rows().max(1) as f64
}

/// Accuracy Gram matrix without ridge.
fn accuracy_gram(t: &PredictionTensor) -> DenseMatrix {
    let m = t.num_models();
    let inv_c = 1.0 / t.num_classes() as f64;
    let mut acc = vec![CompensatedSum::new(); m * (m + 1) / 2];
    for n in 0..t.num_samples() {
        let mut k = 0;
        for i in 0..m {
            let ri = t.row(i, n);
            for l in 0..=i {
                acc[k].add(dot(ri, t.row(l, n)) * inv_c);
                k += 1;
            }
        }
    }
    let inv_n = 1.0 / t.num_samples() as f64;
    let mut q = DenseMatrix::zeros(m, m);
    let mut k = 0;
    for i in 0..m {
        for l in 0..=i {
            let v = acc[k].value() * inv_n;
            q[(i, l)] = v;
            q[(l, i)] = v;
            k += 1;
        }
    }
    q
}

/// Builds the surrogate around `anchor` (which must sum to 1).
///
/// Pass `ridge = None` for [`default_ridge`].
pub fn build_surrogate(
    t: &PredictionTensor,
    y: &LabelVector,
    anchor: &WeightVector,
    ridge: Option<f64>,
) -> Result<QuadraticSurrogate, LossError> {
    check_weights(anchor, t)?;
    check_labels(t, y)?;
    let anchor_sum: f64 = anchor.as_slice().iter().sum();
    if (anchor_sum - 1.0).abs() > 1e-9 {
        return Err(LossError::Domain(format!("anchor sums to {anchor_sum}, not 1")));
    }
    if let Some(r) = ridge {
        if !(r >= 0.0 && r.is_finite()) {
            return Err(LossError::Domain(format!("ridge {r} must be finite and nonnegative")));
        }
    }

    let m = t.num_models();
    let c = t.num_classes();
    let inv_c = 1.0 / c as f64;
    let inv_n = 1.0 / t.num_samples() as f64;

    let mut q = accuracy_gram(t);
    let ridge = ridge.unwrap_or_else(|| default_ridge(&q));
    for i in 0..m {
        q[(i, i)] += ridge;
    }

    let mut lin = vec![CompensatedSum::new(); m];
    let mut div = vec![CompensatedSum::new(); m];
    let mut log_mix = vec![0.0; c];
    for n in 0..t.num_samples() {
        let mix = mixture(anchor.as_slice(), t, n);
        for (j, (&pj, lj)) in mix.iter().zip(log_mix.iter_mut()).enumerate() {
            if !(-MIXTURE_SLACK..=1.0 + MIXTURE_SLACK).contains(&pj) {
                return Err(LossError::Domain(format!(
                    "anchor mixture {pj} (sample {n}, class {j}) is outside [0, 1]"
                )));
            }
            *lj = pj.max(LOG_FLOOR).ln() + 1.0;
        }
        let truth = y.label(n);
        for i in 0..m {
            let row = t.row(i, n);
            lin[i].add(-2.0 * inv_c * row[truth]);
            let g: f64 = row.iter().zip(&log_mix).map(|(&p, &l)| l * p + h(p)).sum();
            div[i].add(g * inv_c);
        }
    }

    Ok(QuadraticSurrogate {
        q,
        q_lin: lin.iter().map(|s| s.value() * inv_n).collect(),
        c_div: div.iter().map(|s| s.value() * inv_n).collect(),
        // Σ_j y_j² = 1 for one-hot labels.
        constant: inv_c,
        ridge,
    })
}
