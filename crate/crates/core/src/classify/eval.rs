use serde::{Deserialize, Serialize};

use super::{Classifier, Sample};
use crate::error::{Error, Result};
use crate::manipulate::ManipulationClass;

const K: usize = ManipulationClass::COUNT;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: ManipulationClass,
    pub support: u64,
    pub predicted: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Rows of `confusion` are true classes, columns predicted classes, both in
/// label order. Macro averages run over classes that occur in the truth or
/// the predictions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n: u64,
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub confusion: [[u64; K]; K],
    pub per_class: Vec<ClassMetrics>,
}

impl MetricsReport {
    pub fn from_predictions(truth: &[ManipulationClass], predicted: &[ManipulationClass]) -> Result<Self> {
        if truth.is_empty() {
            return Err(Error::EmptyTestSet);
        }
        if truth.len() != predicted.len() {
            return Err(Error::LengthMismatch {
                expected: truth.len(),
                actual: predicted.len(),
            });
        }
        let mut confusion = [[0u64; K]; K];
        for (t, p) in truth.iter().zip(predicted) {
            confusion[t.index()][p.index()] += 1;
        }
        let n = truth.len() as u64;
        let correct: u64 = (0..K).map(|k| confusion[k][k]).sum();
        let mut per_class = Vec::with_capacity(K);
        let (mut sp, mut sr, mut sf, mut m) = (0.0, 0.0, 0.0, 0usize);
        for class in ManipulationClass::ALL {
            let k = class.index();
            let support: u64 = confusion[k].iter().sum();
            let predicted: u64 = (0..K).map(|r| confusion[r][k]).sum();
            let tp = confusion[k][k] as f64;
            let precision = if predicted == 0 { 0.0 } else { tp / predicted as f64 };
            let recall = if support == 0 { 0.0 } else { tp / support as f64 };
            let f1 = if precision + recall == 0.0 {
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            };
            if support > 0 || predicted > 0 {
                sp += precision;
                sr += recall;
                sf += f1;
                m += 1;
            }
            per_class.push(ClassMetrics {
                class,
                support,
                predicted,
                precision,
                recall,
                f1,
            });
        }
        let m = m as f64;
        Ok(Self {
            n,
            accuracy: correct as f64 / n as f64,
            macro_precision: sp / m,
            macro_recall: sr / m,
            macro_f1: sf / m,
            confusion,
            per_class,
        })
    }

    /// Off-diagonal cells sorted by count, largest first.
    pub fn top_confusions(&self, limit: usize) -> Vec<(ManipulationClass, ManipulationClass, u64)> {
        let mut cells = Vec::new();
        for t in ManipulationClass::ALL {
            for p in ManipulationClass::ALL {
                let c = self.confusion[t.index()][p.index()];
                if t != p && c > 0 {
                    cells.push((t, p, c));
                }
            }
        }
        cells.sort_by(|a, b| b.2.cmp(&a.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
        cells.truncate(limit);
        cells
    }
}

pub fn evaluate(model: &dyn Classifier, test: &[Sample]) -> Result<MetricsReport> {
    if test.is_empty() {
        return Err(Error::EmptyTestSet);
    }
    let truth: Vec<ManipulationClass> = test.iter().map(|s| s.label).collect();
    let predicted = test
        .iter()
        .map(|s| model.predict(&s.features).map(|p| p.label))
        .collect::<Result<Vec<_>>>()?;
    MetricsReport::from_predictions(&truth, &predicted)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ManipulationClass as C;

    #[test]
    fn perfect_predictions() {
        let truth: Vec<C> = C::ALL.iter().flat_map(|&c| [c, c]).collect();
        let r = MetricsReport::from_predictions(&truth, &truth).unwrap();
        assert_eq!(r.accuracy, 1.0);
        assert_eq!(r.macro_f1, 1.0);
        for i in 0..K {
            for j in 0..K {
                assert_eq!(r.confusion[i][j], if i == j { 2 } else { 0 });
            }
        }
    }

    #[test]
    fn constant_predictor_on_balanced_set() {
        let truth: Vec<C> = C::ALL.iter().flat_map(|&c| [c; 5]).collect();
        let pred = vec![C::Blur; truth.len()];
        let r = MetricsReport::from_predictions(&truth, &pred).unwrap();
        assert!((r.accuracy - 1.0 / 7.0).abs() < 1e-15);
        assert!((r.macro_recall - 1.0 / 7.0).abs() < 1e-15);
        assert!((r.macro_precision - (1.0 / 7.0) / 7.0).abs() < 1e-15);
        for (k, row) in r.confusion.iter().enumerate() {
            assert_eq!(row.iter().sum::<u64>(), 5, "row {k}");
        }
        assert_eq!(r.top_confusions(1)[0].1, C::Blur);
    }

    #[test]
    fn empty_and_mismatched_inputs() {
        assert!(matches!(
            MetricsReport::from_predictions(&[], &[]),
            Err(Error::EmptyTestSet)
        ));
        assert!(MetricsReport::from_predictions(&[C::Blur], &[]).is_err());
    }
}
