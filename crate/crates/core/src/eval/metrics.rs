use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Confusion-matrix metrics with pain (label 1) as the positive class.
/// The `macro_*` fields average the per-class values over both classes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

impl Metrics {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize, tn: usize) -> Self {
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let neg_precision = ratio(tn, tn + fn_);
        let neg_recall = ratio(tn, tn + fp);
        Self {
            accuracy: ratio(tp + tn, tp + fp + fn_ + tn),
            precision,
            recall,
            f1: f1(precision, recall),
            macro_precision: 0.5 * (precision + neg_precision),
            macro_recall: 0.5 * (recall + neg_recall),
            macro_f1: 0.5 * (f1(precision, recall) + f1(neg_precision, neg_recall)),
            tp,
            fp,
            fn_,
            tn,
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

/// `predictions` are scores; a score `>= threshold` predicts pain.
pub fn compute_metrics(predictions: &[f64], labels: &[u8], threshold: f64) -> Result<Metrics> {
    if predictions.len() != labels.len() {
        return Err(Error::Argument(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    if predictions.is_empty() {
        return Err(Error::Argument("no predictions to score".into()));
    }
    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    for (&p, &y) in predictions.iter().zip(labels) {
        match (p >= threshold, y == 1) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    Ok(Metrics::from_counts(tp, fp, fn_, tn))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_example() {
        let m = Metrics::from_counts(3, 1, 2, 4);
        assert_eq!(m.accuracy, 0.7);
        assert_eq!(m.precision, 0.75);
        assert_eq!(m.recall, 0.6);
        assert!((m.f1 - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn perfect_and_all_positive() {
        let m = compute_metrics(&[0.9, 0.1, 0.7, 0.2], &[1, 0, 1, 0], 0.5).unwrap();
        for v in [m.accuracy, m.precision, m.recall, m.f1, m.macro_f1] {
            assert_eq!(v, 1.0);
        }
        let m = compute_metrics(&[1.0; 4], &[1, 0, 1, 0], 0.5).unwrap();
        assert_eq!((m.accuracy, m.recall), (0.5, 1.0));
        let none = compute_metrics(&[0.0; 2], &[0, 0], 0.5).unwrap();
        assert_eq!((none.precision, none.recall, none.f1), (0.0, 0.0, 0.0));
        assert!(compute_metrics(&[], &[], 0.5).is_err());
        assert!(compute_metrics(&[0.1], &[0, 1], 0.5).is_err());
    }

    proptest! {
        #[test]
        fn identities(tp in 0usize..50, fp in 0usize..50, fn_ in 0usize..50, tn in 0usize..50) {
            prop_assume!(tp + fp + fn_ + tn > 0);
            let m = Metrics::from_counts(tp, fp, fn_, tn);
            prop_assert_eq!(m.accuracy, (tp + tn) as f64 / m.total() as f64);
            for v in [m.accuracy, m.precision, m.recall, m.f1, m.macro_precision, m.macro_recall, m.macro_f1] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
            if m.precision + m.recall > 0.0 {
                prop_assert!((m.f1 - 2.0 * m.precision * m.recall / (m.precision + m.recall)).abs() < 1e-15);
            } else {
                prop_assert_eq!(m.f1, 0.0);
            }
        }
    }
}
