//! Seeded synthetic ensembles standing in for a pool of trained classifiers.
//!
//! Per sample `n` with true class `y_n`, model `i` is correct when a uniform
//! draw `u` falls below its target accuracy `a_i`. With probability
//! `correlation` the model reuses the sample's shared draw instead of its own,
//! so models err on the same samples; a wrong model likewise reuses the
//! sample's shared confuser class with probability `correlation`. Marginally
//! each model is still correct with probability exactly `a_i`.
//!
//! The probability row puts flat-Dirichlet mass (normalized unit exponentials)
//! on every class plus an extra `sharpness · C` on the predicted class, so the
//! predicted class carries about `sharpness / (1 + sharpness)` of the row. If
//! the noise happens to outrank the predicted class, the two entries are
//! swapped, which keeps the predicted class the strict argmax.

use super::PipelineError;
use crate::rng::{seeded_rng, SeededRng};
use crate::types::{LabelVector, PredictionTensor, SplitSpec};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub num_models: usize,
    pub num_samples: usize,
    pub num_classes: usize,
    /// Target accuracies are drawn uniformly from `[low, high]`.
    pub accuracy_range: (f64, f64),
    /// Shared-noise weight in `[0, 1)`.
    pub correlation: f64,
    /// Peakedness of the probability rows, `> 0`.
    pub sharpness: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn new(num_models: usize, num_samples: usize, num_classes: usize, seed: u64) -> Self {
        Self {
            num_models,
            num_samples,
            num_classes,
            accuracy_range: (0.55, 0.8),
            correlation: 0.3,
            sharpness: 1.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |msg: String| Err(PipelineError::InvalidSpec(msg));
        if self.num_models < 2 {
            return bad(format!("need at least 2 models, got {}", self.num_models));
        }
        if self.num_samples == 0 {
            return bad("need at least one sample".into());
        }
        if self.num_classes < 2 {
            return bad(format!("need at least 2 classes, got {}", self.num_classes));
        }
        let (low, high) = self.accuracy_range;
        let chance = 1.0 / self.num_classes as f64;
        if !(low > chance && low <= high && high < 1.0) {
            return bad(format!(
                "accuracy range ({low}, {high}) must satisfy {chance} < low <= high < 1"
            ));
        }
        if !(0.0..1.0).contains(&self.correlation) {
            return bad(format!("correlation {} is outside [0, 1)", self.correlation));
        }
        if !(self.sharpness > 0.0 && self.sharpness.is_finite()) {
            return bad(format!("sharpness {} must be positive", self.sharpness));
        }
        Ok(())
    }
}

/// A generated ensemble with its per-model target accuracies.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticEnsemble {
    pub tensor: PredictionTensor,
    pub labels: LabelVector,
    pub split: SplitSpec,
    pub target_accuracy: Vec<f64>,
}

/// A class other than `truth`, uniformly.
fn wrong_class(rng: &mut SeededRng, truth: usize, num_classes: usize) -> usize {
    let k = rng.below(num_classes as u64 - 1) as usize;
    if k >= truth {
        k + 1
    } else {
        k
    }
}

fn fill_row(rng: &mut SeededRng, predicted: usize, sharpness: f64, row: &mut [f64]) {
    let c = row.len();
    for v in row.iter_mut() {
        *v = rng.exponential();
    }
    row[predicted] += sharpness * c as f64;
    let total: f64 = row.iter().sum();
    row.iter_mut().for_each(|v| *v /= total);
    let top = crate::types::argmax(row);
    if top != predicted {
        row.swap(top, predicted);
    }
}

pub fn generate_synthetic_ensemble(spec: &SyntheticSpec) -> Result<SyntheticEnsemble, PipelineError> {
    spec.validate()?;
    let (m, n, c) = (spec.num_models, spec.num_samples, spec.num_classes);
    let mut rng = seeded_rng(spec.seed);

    let labels: Vec<usize> = (0..n).map(|_| rng.below(c as u64) as usize).collect();
    let (low, high) = spec.accuracy_range;
    let target: Vec<f64> = (0..m).map(|_| rng.uniform_range(low, high)).collect();

    let block = n * c;
    let mut probs = vec![0.0; m * block];
    for (s, &truth) in labels.iter().enumerate() {
        let shared = rng.uniform();
        let confuser = wrong_class(&mut rng, truth, c);
        for (i, &a) in target.iter().enumerate() {
            let own = rng.uniform();
            let u = if rng.uniform() < spec.correlation { shared } else { own };
            let predicted = if u < a {
                truth
            } else if rng.uniform() < spec.correlation {
                confuser
            } else {
                wrong_class(&mut rng, truth, c)
            };
            let start = i * block + s * c;
            fill_row(&mut rng, predicted, spec.sharpness, &mut probs[start..start + c]);
        }
    }

    let tensor = PredictionTensor::new(m, n, c, probs)?;
    Ok(SyntheticEnsemble {
        tensor,
        labels: LabelVector::new(labels, c)?,
        split: SplitSpec::default_for(n),
        target_accuracy: target,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model_accuracy(e: &SyntheticEnsemble, i: usize) -> f64 {
        let n = e.labels.len();
        let hits = (0..n).filter(|&s| e.tensor.argmax(i, s) == e.labels.label(s)).count();
        hits as f64 / n as f64
    }

    fn mean_agreement(e: &SyntheticEnsemble) -> f64 {
        let (m, n) = (e.tensor.num_models(), e.tensor.num_samples());
        let mut agree = 0usize;
        let mut pairs = 0usize;
        for i in 0..m {
            for k in i + 1..m {
                agree += (0..n)
                    .filter(|&s| e.tensor.argmax(i, s) == e.tensor.argmax(k, s))
                    .count();
                pairs += n;
            }
        }
        agree as f64 / pairs as f64
    }

    #[test]
    fn deterministic() {
        let spec = SyntheticSpec::new(3, 10, 2, 7);
        assert_eq!(
            generate_synthetic_ensemble(&spec).unwrap(),
            generate_synthetic_ensemble(&spec).unwrap()
        );
        let other = SyntheticSpec {
            seed: 8,
            ..spec.clone()
        };
        assert_ne!(
            generate_synthetic_ensemble(&spec).unwrap().tensor,
            generate_synthetic_ensemble(&other).unwrap().tensor
        );
    }

    #[test]
    fn accuracy_calibrated() {
        let spec = SyntheticSpec {
            accuracy_range: (0.4, 0.9),
            ..SyntheticSpec::new(8, 2500, 5, 11)
        };
        let e = generate_synthetic_ensemble(&spec).unwrap();
        for i in 0..8 {
            let acc = model_accuracy(&e, i);
            assert!(
                (acc - e.target_accuracy[i]).abs() <= 0.05,
                "model {i}: {acc} vs {}",
                e.target_accuracy[i]
            );
        }
    }

    #[test]
    fn high_accuracy_many_classes() {
        let spec = SyntheticSpec {
            accuracy_range: (0.95, 0.95),
            ..SyntheticSpec::new(4, 5000, 10, 3)
        };
        let e = generate_synthetic_ensemble(&spec).unwrap();
        for i in 0..4 {
            let acc = model_accuracy(&e, i);
            assert!((0.90..=1.0).contains(&acc), "{acc}");
        }
    }

    #[test]
    fn correlation_raises_agreement() {
        let base = SyntheticSpec {
            sharpness: 20.0,
            ..SyntheticSpec::new(6, 2000, 4, 5)
        };
        let low = generate_synthetic_ensemble(&SyntheticSpec {
            correlation: 0.0,
            ..base.clone()
        })
        .unwrap();
        let high = generate_synthetic_ensemble(&SyntheticSpec {
            correlation: 0.99,
            ..base
        })
        .unwrap();
        assert!(mean_agreement(&high) >= mean_agreement(&low));
    }

    #[test]
    fn rows_are_valid_with_predicted_argmax() {
        let e = generate_synthetic_ensemble(&SyntheticSpec {
            sharpness: 0.01,
            ..SyntheticSpec::new(3, 200, 7, 2)
        })
        .unwrap();
        assert_eq!(crate::types::validate_tensor(&e.tensor), Ok(()));
    }

    #[test]
    fn invalid_specs_rejected() {
        let ok = SyntheticSpec::new(3, 10, 4, 0);
        for bad in [
            SyntheticSpec {
                num_models: 1,
                ..ok.clone()
            },
            SyntheticSpec {
                num_classes: 1,
                ..ok.clone()
            },
            SyntheticSpec {
                accuracy_range: (0.2, 0.9),
                ..ok.clone()
            },
            SyntheticSpec {
                accuracy_range: (0.8, 0.7),
                ..ok.clone()
            },
            SyntheticSpec {
                correlation: 1.0,
                ..ok.clone()
            },
            SyntheticSpec {
                sharpness: 0.0,
                ..ok.clone()
            },
        ] {
            assert!(matches!(
                generate_synthetic_ensemble(&bad),
                Err(PipelineError::InvalidSpec(_))
            ));
        }
    }
}
