//! Seven-way manipulation classification from a revealed marker.
//!
//! Handcrafted degradation features ([`extract_features`]) feed a softmax
//! regression ([`train`]). Anything implementing [`Classifier`] can be
//! evaluated with [`evaluate`].

pub mod eval;
pub mod features;
pub mod model;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::manipulate::ManipulationClass;

pub use eval::{evaluate, ClassMetrics, MetricsReport};
pub use features::{extract_features, FeatureVector, FEATURE_LEN, FEATURE_NAMES};
pub use model::{loss_and_gradient, softmax, train, Design, LogisticModel, ModelMetadata, Normalizer, TrainOutcome, TrainParams};

pub type ClassLabel = ManipulationClass;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub features: FeatureVector,
    pub label: ClassLabel,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: ClassLabel,
    pub posterior: [f64; ManipulationClass::COUNT],
}

impl Prediction {
    /// Argmax with ties going to the earlier class.
    pub fn from_posterior(posterior: [f64; ManipulationClass::COUNT]) -> Self {
        let mut best = 0;
        for k in 1..posterior.len() {
            if posterior[k] > posterior[best] {
                best = k;
            }
        }
        Self {
            label: ManipulationClass::ALL[best],
            posterior,
        }
    }

    pub fn confidence(&self) -> f64 {
        self.posterior[self.label.index()]
    }
}

pub trait Classifier: Send + Sync {
    fn feature_len(&self) -> usize;
    fn predict(&self, f: &FeatureVector) -> Result<Prediction>;
}
