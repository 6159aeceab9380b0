//! Evaluation metrics.
//!
//! Binary convention for score labels: samples whose true score is exactly 0
//! are excluded; the positive class is `score > 0` (and `prediction > 0`).
//! F1 is the support-weighted mean of per-class F1.

use serde::{Deserialize, Serialize};

use crate::data::{label_to_class7, Split};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub split: Split,
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub acc7: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub acc2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mae: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corr: Option<f64>,
    /// Set when Pearson correlation was undefined and reported as 0.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub corr_degenerate: bool,
    /// Top-1 accuracy for tasks with more than two classes.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
}

impl MetricsReport {
    fn empty(split: Split, n: usize) -> Self {
        Self {
            split,
            n,
            acc7: None,
            acc2: None,
            f1: None,
            mae: None,
            corr: None,
            corr_degenerate: false,
            accuracy: None,
        }
    }

    /// Higher is better; used for model selection.
    pub fn selection_score(&self) -> f64 {
        match (self.mae, self.acc2, self.accuracy) {
            (Some(mae), _, _) => -mae,
            (None, Some(acc), _) => acc,
            (None, None, Some(acc)) => acc,
            _ => f64::NEG_INFINITY,
        }
    }
}

pub fn mean_absolute_error(y: &[f64], y_hat: &[f64]) -> f64 {
    y.iter().zip(y_hat).map(|(a, b)| (a - b).abs()).sum::<f64>() / y.len() as f64
}

/// Pearson correlation; `None` when either side has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

pub fn accuracy(y: &[usize], y_hat: &[usize]) -> f64 {
    y.iter().zip(y_hat).filter(|(a, b)| a == b).count() as f64 / y.len() as f64
}

/// Support-weighted mean of per-class F1 over `classes` labels. A class with
/// no true and no predicted samples contributes nothing; one with support but
/// no correct prediction has F1 0.
pub fn weighted_f1(y: &[usize], y_hat: &[usize], classes: usize) -> f64 {
    let mut tp = vec![0usize; classes];
    let mut fp = vec![0usize; classes];
    let mut fn_ = vec![0usize; classes];
    for (&t, &p) in y.iter().zip(y_hat) {
        if t == p {
            tp[t] += 1;
        } else {
            fp[p] += 1;
            fn_[t] += 1;
        }
    }
    let total = y.len() as f64;
    (0..classes)
        .map(|c| {
            let support = (tp[c] + fn_[c]) as f64;
            let denom = (2 * tp[c] + fp[c] + fn_[c]) as f64;
            let f1 = if denom == 0.0 { 0.0 } else { 2.0 * tp[c] as f64 / denom };
            f1 * support / total
        })
        .sum()
}

/// Metrics for continuous scores.
pub fn regression_report(split: Split, y: &[f64], y_hat: &[f64]) -> MetricsReport {
    let mut r = MetricsReport::empty(split, y.len());
    r.mae = Some(mean_absolute_error(y, y_hat));
    match pearson(y, y_hat) {
        Some(c) => r.corr = Some(c),
        None => {
            r.corr = Some(0.0);
            r.corr_degenerate = true;
        }
    }
    let c7: Vec<usize> = y.iter().map(|&v| label_to_class7(v) as usize).collect();
    let p7: Vec<usize> = y_hat.iter().map(|&v| label_to_class7(v) as usize).collect();
    r.acc7 = Some(accuracy(&c7, &p7));

    let (bt, bp): (Vec<usize>, Vec<usize>) = y
        .iter()
        .zip(y_hat)
        .filter(|(t, _)| **t != 0.0)
        .map(|(&t, &p)| (usize::from(t > 0.0), usize::from(p > 0.0)))
        .unzip();
    if !bt.is_empty() {
        r.acc2 = Some(accuracy(&bt, &bp));
        r.f1 = Some(weighted_f1(&bt, &bp, 2));
    }
    r
}

/// Metrics for class labels. Binary tasks report acc2 and f1 only.
pub fn classification_report(split: Split, y: &[usize], y_hat: &[usize], classes: usize) -> MetricsReport {
    let mut r = MetricsReport::empty(split, y.len());
    let acc = accuracy(y, y_hat);
    if classes == 2 {
        r.acc2 = Some(acc);
    } else {
        r.accuracy = Some(acc);
    }
    r.f1 = Some(weighted_f1(y, y_hat, classes));
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_regression() {
        let y = [-2.0, -0.4, 0.3, 1.7, 2.9];
        let r = regression_report(Split::Test, &y, &y);
        assert_eq!(r.mae, Some(0.0));
        assert!((r.corr.unwrap() - 1.0).abs() < 1e-12);
        assert_eq!((r.acc7, r.acc2, r.f1), (Some(1.0), Some(1.0), Some(1.0)));
    }

    #[test]
    fn constant_prediction_flags_degenerate_corr() {
        let r = regression_report(Split::Test, &[1.0, 2.0, -1.0], &[0.5; 3]);
        assert_eq!(r.corr, Some(0.0));
        assert!(r.corr_degenerate);
    }

    #[test]
    fn zero_scores_are_excluded_from_binary_metrics() {
        // the two zero-score samples would be wrong under either convention
        let y = [0.0, 0.0, 1.0, -1.0];
        let p = [1.0, -1.0, 1.0, -1.0];
        let r = regression_report(Split::Test, &y, &p);
        assert_eq!(r.acc2, Some(1.0));
    }

    #[test]
    fn binary_task_reports_only_acc2_and_f1() {
        let r = classification_report(Split::Valid, &[0, 1, 1], &[0, 1, 0], 2);
        assert!(r.acc2.is_some() && r.f1.is_some());
        assert!(r.acc7.is_none() && r.mae.is_none() && r.corr.is_none());
    }
}
