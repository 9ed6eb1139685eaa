//! Support-weighted classification metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: usize,
    pub support: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub per_class: Vec<ClassMetrics>,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
}

impl EvalReport {
    /// Metrics from a square confusion matrix. Precision or recall with a zero
    /// denominator counts as 0 for that class.
    pub fn from_confusion(confusion: Vec<Vec<usize>>) -> Result<Self> {
        let k = confusion.len();
        if confusion.iter().any(|r| r.len() != k) {
            return Err(Error::Shape("confusion matrix must be square".into()));
        }
        let total: usize = confusion.iter().flatten().sum();
        if total == 0 {
            return Err(Error::Config("cannot evaluate an empty split".into()));
        }
        let trace: usize = (0..k).map(|i| confusion[i][i]).sum();
        let mut per_class = Vec::with_capacity(k);
        let (mut wp, mut wr, mut wf) = (0.0, 0.0, 0.0);
        for c in 0..k {
            let tp = confusion[c][c] as f64;
            let support: usize = confusion[c].iter().sum();
            let predicted: usize = (0..k).map(|r| confusion[r][c]).sum();
            let precision = if predicted > 0 { tp / predicted as f64 } else { 0.0 };
            let recall = if support > 0 { tp / support as f64 } else { 0.0 };
            let f1 = if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                0.0
            };
            let weight = support as f64 / total as f64;
            wp += weight * precision;
            wr += weight * recall;
            wf += weight * f1;
            per_class.push(ClassMetrics {
                class: c,
                support,
                precision,
                recall,
                f1,
            });
        }
        Ok(Self {
            accuracy: trace as f64 / total as f64,
            precision: wp,
            recall: wr,
            f1: wf,
            per_class,
            confusion,
        })
    }

    pub fn from_predictions(truth: &[usize], predicted: &[usize], num_classes: usize) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::Shape("truth and prediction lengths differ".into()));
        }
        let k = truth
            .iter()
            .chain(predicted)
            .map(|&c| c + 1)
            .max()
            .unwrap_or(0)
            .max(num_classes);
        let mut confusion = vec![vec![0; k]; k];
        for (&t, &p) in truth.iter().zip(predicted) {
            confusion[t][p] += 1;
        }
        Self::from_confusion(confusion)
    }

    pub fn csv_header() -> &'static str {
        "accuracy,precision,recall,f1"
    }

    pub fn csv_row(&self) -> String {
        format!("{},{},{},{}", self.accuracy, self.precision, self.recall, self.f1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_classifier() {
        let r = EvalReport::from_predictions(&[0, 1, 1, 0], &[0, 1, 1, 0], 2).unwrap();
        assert_eq!((r.accuracy, r.precision, r.recall, r.f1), (1.0, 1.0, 1.0, 1.0));
        let r = EvalReport::from_predictions(&[1], &[1], 2).unwrap();
        assert_eq!((r.accuracy, r.precision, r.recall, r.f1), (1.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn constant_predictor_on_balanced_binary() {
        // class 0: P=1/2, R=1, F1=2/3; class 1: all zero; each weighted 1/2
        let r = EvalReport::from_predictions(&[0, 0, 1, 1], &[0, 0, 0, 0], 2).unwrap();
        assert_eq!(r.accuracy, 0.5);
        assert_eq!(r.recall, 0.5);
        assert_eq!(r.precision, 0.25);
        assert!((r.f1 - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(r.confusion, vec![vec![2, 0], vec![2, 0]]);
    }

    #[test]
    fn empty_split_is_an_error() {
        assert!(EvalReport::from_predictions(&[], &[], 2).is_err());
    }
}
