//! Multinomial logistic regression over z-scored features.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::features::FeatureVector;
use super::{Classifier, Prediction, Sample};
use crate::error::{Error, Result};
use crate::manipulate::ManipulationClass;
use crate::stego::EngineId;

const K: usize = ManipulationClass::COUNT;
const MAX_BACKOFFS: u32 = 10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainParams {
    pub lr: f64,
    pub epochs: usize,
    pub l2: f64,
    /// Heavy-ball coefficient; 0 gives plain gradient descent.
    pub momentum: f64,
    pub seed: u64,
    /// Reweight classes inversely to their frequency.
    pub balanced: bool,
}

impl Default for TrainParams {
    fn default() -> Self {
        Self {
            lr: 0.1,
            epochs: 500,
            l2: 1e-4,
            momentum: 0.98,
            seed: 0,
            balanced: true,
        }
    }
}

impl TrainParams {
    fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidParameter(format!("lr must be positive, got {}", self.lr)));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(Error::InvalidParameter(format!("l2 must be >= 0, got {}", self.l2)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidParameter(format!(
                "momentum must be in [0, 1), got {}",
                self.momentum
            )));
        }
        Ok(())
    }
}

/// Per-feature z-score statistics from the training split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Normalizer {
    /// Zero-variance features get a unit scale so they normalize to 0.
    pub fn fit(rows: &[&[f64]]) -> Self {
        let d = rows.first().map_or(0, |r| r.len());
        let n = rows.len() as f64;
        let mut mean = vec![0.0; d];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(*r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut std = vec![0.0; d];
        for r in rows {
            for ((s, v), m) in std.iter_mut().zip(*r).zip(&mean) {
                *s += (v - m).powi(2);
            }
        }
        for s in &mut std {
            *s = (*s / n).sqrt();
            if *s < 1e-12 {
                *s = 1.0;
            }
        }
        Self { mean, std }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelMetadata {
    pub engine: Option<EngineId>,
    pub protocol: Option<String>,
    pub seed: u64,
}

/// Weights are stored feature-major: `weights[j * 7 + k]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub bias: [f64; K],
    pub normalization: Normalizer,
    pub metadata: ModelMetadata,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: LogisticModel,
    /// Loss after each accepted step, starting with the initial loss.
    pub loss_history: Vec<f64>,
    pub backoffs: u32,
}

impl LogisticModel {
    pub fn feature_len(&self) -> usize {
        self.normalization.mean.len()
    }

    /// Raw class scores for an already normalized row.
    fn scores(&self, z: &[f64]) -> [f64; K] {
        let mut s = self.bias;
        for (j, zj) in z.iter().enumerate() {
            let row = &self.weights[j * K..(j + 1) * K];
            for k in 0..K {
                s[k] += zj * row[k];
            }
        }
        s
    }
}

impl Classifier for LogisticModel {
    fn feature_len(&self) -> usize {
        LogisticModel::feature_len(self)
    }

    fn predict(&self, f: &FeatureVector) -> Result<Prediction> {
        if f.len() != self.feature_len() {
            return Err(Error::LengthMismatch {
                expected: self.feature_len(),
                actual: f.len(),
            });
        }
        let posterior = softmax(&self.scores(&self.normalization.apply(f.values())));
        Ok(Prediction::from_posterior(posterior))
    }
}

pub fn softmax(s: &[f64; K]) -> [f64; K] {
    let m = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut p = [0.0; K];
    let mut z = 0.0;
    for k in 0..K {
        p[k] = (s[k] - m).exp();
        z += p[k];
    }
    p.iter_mut().for_each(|v| *v /= z);
    p
}

/// Normalized training design: rows, labels and per-row weights summing to 1.
pub struct Design {
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub weights: Vec<f64>,
}

impl Design {
    pub fn dim(&self) -> usize {
        self.rows.first().map_or(0, |r| r.len())
    }
}

/// Weighted cross-entropy plus `l2/2 * ||W||^2` (bias unpenalized), and its
/// gradient. `theta` packs the weights (feature-major) followed by the bias.
pub fn loss_and_gradient(theta: &[f64], design: &Design, l2: f64) -> (f64, Vec<f64>) {
    let d = design.dim();
    let nw = d * K;
    let mut grad = vec![0.0; theta.len()];
    let mut loss = 0.0;
    for ((x, &y), &sw) in design.rows.iter().zip(&design.labels).zip(&design.weights) {
        let mut s = [0.0; K];
        s.copy_from_slice(&theta[nw..nw + K]);
        for (j, xj) in x.iter().enumerate() {
            for k in 0..K {
                s[k] += xj * theta[j * K + k];
            }
        }
        let m = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + s.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        loss += sw * (lse - s[y]);
        let mut r = [0.0; K];
        for k in 0..K {
            r[k] = sw * ((s[k] - lse).exp() - if k == y { 1.0 } else { 0.0 });
        }
        for (j, xj) in x.iter().enumerate() {
            for k in 0..K {
                grad[j * K + k] += xj * r[k];
            }
        }
        for k in 0..K {
            grad[nw + k] += r[k];
        }
    }
    for i in 0..nw {
        loss += 0.5 * l2 * theta[i] * theta[i];
        grad[i] += l2 * theta[i];
    }
    (loss, grad)
}

/// Full-batch gradient descent with heavy-ball momentum. A step that raises
/// the loss is rejected: the velocity is dropped first, and only a rejected
/// plain gradient step halves the learning rate. Samples are put in a
/// canonical order first so the model does not depend on the order they were
/// supplied in.
pub fn train(samples: &[Sample], params: &TrainParams) -> Result<TrainOutcome> {
    params.validate()?;
    let d = samples.first().map_or(0, |s| s.features.len());
    for s in samples {
        if s.features.len() != d {
            return Err(Error::LengthMismatch {
                expected: d,
                actual: s.features.len(),
            });
        }
        if let Some(index) = s.features.first_non_finite() {
            return Err(Error::NonFiniteFeature { index });
        }
    }
    let mut counts = [0usize; K];
    for s in samples {
        counts[s.label.index()] += 1;
    }
    let present = counts.iter().filter(|&&c| c > 0).count();
    if present < 2 {
        return Err(Error::DegenerateData(format!(
            "training needs at least 2 classes, found {present}"
        )));
    }

    let mut order: Vec<&Sample> = samples.iter().collect();
    order.sort_by(|a, b| {
        a.label.cmp(&b.label).then_with(|| {
            a.features
                .values()
                .iter()
                .zip(b.features.values())
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    });
    let raw: Vec<&[f64]> = order.iter().map(|s| s.features.values()).collect();
    let normalization = Normalizer::fit(&raw);
    let n = order.len() as f64;
    let design = Design {
        rows: raw.iter().map(|r| normalization.apply(r)).collect(),
        labels: order.iter().map(|s| s.label.index()).collect(),
        weights: order
            .iter()
            .map(|s| {
                if params.balanced {
                    1.0 / (present as f64 * counts[s.label.index()] as f64)
                } else {
                    1.0 / n
                }
            })
            .collect(),
    };

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let init = Normal::new(0.0, 0.01).expect("valid std");
    let mut theta: Vec<f64> = (0..d * K).map(|_| init.sample(&mut rng)).collect();
    theta.extend([0.0; K]);

    let mut lr = params.lr;
    let mut backoffs = 0;
    let (mut loss, mut grad) = loss_and_gradient(&theta, &design, params.l2);
    let mut history = vec![loss];
    let mut velocity = vec![0.0; theta.len()];
    let mut coasting = false;
    for _ in 0..params.epochs {
        let step: Vec<f64> = velocity
            .iter()
            .zip(&grad)
            .map(|(v, g)| params.momentum * v + g)
            .collect();
        let cand: Vec<f64> = theta.iter().zip(&step).map(|(t, s)| t - lr * s).collect();
        let (cl, cg) = loss_and_gradient(&cand, &design, params.l2);
        if cl > loss || !cl.is_finite() {
            velocity.iter_mut().for_each(|v| *v = 0.0);
            if coasting {
                coasting = false;
                continue;
            }
            backoffs += 1;
            if backoffs > MAX_BACKOFFS {
                break;
            }
            lr /= 2.0;
            continue;
        }
        velocity = step;
        coasting = params.momentum > 0.0;
        theta = cand;
        loss = cl;
        grad = cg;
        history.push(loss);
    }
    log::debug!(
        "trained on {} samples: loss {:.4} -> {:.4}, {} backoffs",
        samples.len(),
        history[0],
        loss,
        backoffs
    );

    let mut bias = [0.0; K];
    bias.copy_from_slice(&theta[d * K..]);
    theta.truncate(d * K);
    Ok(TrainOutcome {
        model: LogisticModel {
            weights: theta,
            bias,
            normalization,
            metadata: ModelMetadata {
                seed: params.seed,
                ..Default::default()
            },
        },
        loss_history: history,
        backoffs,
    })
}
