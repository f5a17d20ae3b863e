use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{AugInfError, Result};

/// Probability that a random positive outscores a random negative, ties
/// counted half. Computed from tie-averaged ranks.
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(AugInfError::Data(format!("{} scores for {} labels", scores.len(), labels.len())));
    }
    let pos = labels.iter().filter(|&&l| l == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(AugInfError::Data("AUC is undefined when only one class is present".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // 1-based ranks i+1..=j+1 share their average
        let avg = (i + j + 2) as f64 / 2.0;
        rank_sum += avg * order[i..=j].iter().filter(|&&k| labels[k] == 1).count() as f64;
        i = j + 1;
    }
    let (p, n) = (pos as f64, neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// F1 of the positive class, predicting positive when `score >= cut`.
/// Zero when precision or recall is undefined.
pub fn f1(scores: &[f64], labels: &[u8], cut: f64) -> f64 {
    let (mut tp, mut fp, mut fneg) = (0usize, 0usize, 0usize);
    for (&s, &l) in scores.iter().zip(labels) {
        match (s >= cut, l == 1) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fneg += 1,
            (false, false) => {}
        }
    }
    if tp + fp == 0 && tp + fneg == 0 {
        warn!("F1 undefined: no predicted and no actual positives; reporting 0");
        return 0.0;
    }
    if tp == 0 {
        return 0.0;
    }
    let precision = tp as f64 / (tp + fp) as f64;
    let recall = tp as f64 / (tp + fneg) as f64;
    2.0 * precision * recall / (precision + recall)
}

/// Mean and sample standard deviation (zero for fewer than two values).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinaryMetrics {
    pub auc: f64,
    pub f1: f64,
}

pub const F1_CUT: f64 = 0.5;

pub fn binary_metrics(scores: &[f64], labels: &[u8]) -> Result<BinaryMetrics> {
    Ok(BinaryMetrics { auc: auc(scores, labels)?, f1: f1(scores, labels, F1_CUT) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spot_values() {
        assert_eq!(auc(&[0.9, 0.8, 0.3, 0.1], &[1, 0, 1, 0]).unwrap(), 0.75);
        assert_eq!(auc(&[0.9, 0.8, 0.3, 0.1], &[1, 1, 0, 0]).unwrap(), 1.0);
        assert_eq!(auc(&[0.4; 5], &[1, 0, 1, 0, 0]).unwrap(), 0.5);
        assert_eq!(f1(&[0.9, 0.8, 0.3, 0.1], &[1, 1, 0, 0], 0.5), 1.0);
    }

    #[test]
    fn single_class_auc_is_an_error() {
        assert!(auc(&[0.1, 0.2], &[1, 1]).is_err());
    }

    #[test]
    fn f1_without_any_positives_is_zero() {
        assert_eq!(f1(&[0.1, 0.2], &[0, 0], 0.5), 0.0);
        assert_eq!(f1(&[0.1, 0.2], &[1, 0], 0.5), 0.0);
    }

    #[test]
    fn f1_hand_value() {
        // tp = 1, fp = 1, fn = 1 -> precision = recall = 1/2
        assert!((f1(&[0.9, 0.7, 0.2, 0.1], &[1, 0, 1, 0], 0.5) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn mean_std_of_constant_is_zero() {
        assert_eq!(mean_std(&[0.3, 0.3, 0.3]).1, 0.0);
        let (m, s) = mean_std(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 2f64.sqrt()).abs() < 1e-15);
    }
}
