//! Accuracy and ROC AUC.

use crate::error::{Error, Result};
use crate::learn::argmax;
use crate::learn::matrix::Matrix;

pub fn accuracy_percent(truth: &[u8], predicted: &[u8]) -> f64 {
    if truth.is_empty() {
        return f64::NAN;
    }
    let correct = truth.iter().zip(predicted).filter(|(a, b)| a == b).count();
    100.0 * correct as f64 / truth.len() as f64
}

/// Mean per-class recall over classes present in `truth`, in percent.
pub fn balanced_accuracy_percent(truth: &[u8], predicted: &[u8], n_classes: usize) -> f64 {
    let mut hit = vec![0usize; n_classes];
    let mut total = vec![0usize; n_classes];
    for (&t, &p) in truth.iter().zip(predicted) {
        total[usize::from(t)] += 1;
        if t == p {
            hit[usize::from(t)] += 1;
        }
    }
    let recalls: Vec<f64> = hit
        .iter()
        .zip(&total)
        .filter(|(_, &n)| n > 0)
        .map(|(&h, &n)| h as f64 / n as f64)
        .collect();
    if recalls.is_empty() {
        return f64::NAN;
    }
    100.0 * recalls.iter().sum::<f64>() / recalls.len() as f64
}

/// Area under the ROC curve, built by sweeping the threshold over the
/// distinct scores and integrating with trapezoids; tied scores form one
/// diagonal step. `None` when either class is absent.
pub fn binary_auc(positive: &[bool], scores: &[f64]) -> Option<f64> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut area = 0.0;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        let (tp0, fp0) = (tp, fp);
        while i < order.len() && scores[order[i]] == s {
            if positive[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        // trapezoid in count units, normalized once at the end
        area += (fp - fp0) as f64 * (tp + tp0) as f64 / 2.0;
    }
    Some(area / (n_pos as f64 * n_neg as f64))
}

/// One-vs-rest AUC averaged over classes. With two classes this is the
/// binary AUC of the class-1 scores. Classes absent from `truth` are
/// skipped with a warning.
pub fn roc_auc_macro(truth: &[u8], scores: &Matrix) -> Result<f64> {
    let n_classes = scores.n_cols();
    if scores.n_rows() != truth.len() {
        return Err(Error::InvalidParameter("score rows do not match labels".into()));
    }
    if n_classes == 2 {
        let pos: Vec<bool> = truth.iter().map(|&t| t == 1).collect();
        let s: Vec<f64> = scores.column(1).collect();
        return binary_auc(&pos, &s)
            .ok_or_else(|| Error::Insufficient("AUC needs both classes in the test labels".into()));
    }
    let mut aucs = Vec::new();
    for c in 0..n_classes {
        let pos: Vec<bool> = truth.iter().map(|&t| usize::from(t) == c).collect();
        let s: Vec<f64> = scores.column(c).collect();
        match binary_auc(&pos, &s) {
            Some(a) => aucs.push(a),
            None => log::warn!("class {c} absent from test labels; skipped in macro AUC"),
        }
    }
    if aucs.is_empty() {
        return Err(Error::Insufficient("AUC needs at least two classes in the test labels".into()));
    }
    Ok(aucs.iter().sum::<f64>() / aucs.len() as f64)
}

/// Predicted classes from a score matrix (ties to the lowest class).
pub fn predictions(scores: &Matrix) -> Vec<u8> {
    scores.rows().map(|r| argmax(r) as u8).collect()
}
