//! Confusion matrices, classification metrics and ROC analysis.
//!
//! The positive class is fake (label 1); a score at or above the threshold
//! predicts fake.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Label;

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("scores and labels differ in length ({scores} vs {labels})")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("no documents to evaluate")]
    Empty,
    #[error("confusion matrix is empty")]
    EmptyMatrix,
    #[error("ROC undefined: only one class present")]
    SingleClassLabels,
    #[error("non-finite score at index {0}")]
    NonFiniteScore(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn add(&mut self, other: &ConfusionMatrix) {
        self.tp += other.tp;
        self.tn += other.tn;
        self.fp += other.fp;
        self.fn_ += other.fn_;
    }
}

fn check_inputs(scores: &[f64], labels: &[Label]) -> Result<(), EvalError> {
    if scores.len() != labels.len() {
        return Err(EvalError::LengthMismatch {
            scores: scores.len(),
            labels: labels.len(),
        });
    }
    if scores.is_empty() {
        return Err(EvalError::Empty);
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(EvalError::NonFiniteScore(i));
    }
    Ok(())
}

pub fn confusion(
    scores: &[f64],
    labels: &[Label],
    threshold: f64,
) -> Result<ConfusionMatrix, EvalError> {
    check_inputs(scores, labels)?;
    let mut cm = ConfusionMatrix::default();
    for (&s, &y) in scores.iter().zip(labels) {
        match (s >= threshold, y) {
            (true, Label::Fake) => cm.tp += 1,
            (true, Label::Authentic) => cm.fp += 1,
            (false, Label::Fake) => cm.fn_ += 1,
            (false, Label::Authentic) => cm.tn += 1,
        }
    }
    Ok(cm)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricSet {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub roc_auc: f64,
}

impl MetricSet {
    pub const NAMES: [&'static str; 5] = ["accuracy", "precision", "recall", "f1", "roc_auc"];

    pub fn values(&self) -> [f64; 5] {
        [
            self.accuracy,
            self.precision,
            self.recall,
            self.f1,
            self.roc_auc,
        ]
    }

    pub fn from_values(v: [f64; 5]) -> Self {
        MetricSet {
            accuracy: v[0],
            precision: v[1],
            recall: v[2],
            f1: v[3],
            roc_auc: v[4],
        }
    }

    /// Elementwise `self - other`.
    pub fn minus(&self, other: &MetricSet) -> MetricSet {
        let (a, b) = (self.values(), other.values());
        MetricSet::from_values(std::array::from_fn(|i| a[i] - b[i]))
    }

    /// Elementwise mean; `None` for an empty slice.
    pub fn mean(sets: &[MetricSet]) -> Option<MetricSet> {
        if sets.is_empty() {
            return None;
        }
        let mut acc = [0.0; 5];
        for s in sets {
            for (a, v) in acc.iter_mut().zip(s.values()) {
                *a += v;
            }
        }
        Some(MetricSet::from_values(acc.map(|a| a / sets.len() as f64)))
    }
}

/// Accuracy, precision, recall and F1 from `cm`, with `auc` passed through.
/// Undefined ratios are reported as 0.
pub fn metrics(cm: &ConfusionMatrix, auc: f64) -> Result<MetricSet, EvalError> {
    let total = cm.total();
    if total == 0 {
        return Err(EvalError::EmptyMatrix);
    }
    let ratio = |num: u64, den: u64| {
        if den == 0 {
            0.0
        } else {
            num as f64 / den as f64
        }
    };
    let precision = ratio(cm.tp, cm.tp + cm.fp);
    let recall = ratio(cm.tp, cm.tp + cm.fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(MetricSet {
        accuracy: ratio(cm.tp + cm.tn, total),
        precision,
        recall,
        f1,
        roc_auc: auc,
    })
}

/// ROC points from `(0, 0)` to `(1, 1)`. `thresholds[i]` is the score cut
/// producing `points[i]`; the first entry is `+inf`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<(f64, f64)>,
    pub thresholds: Vec<f64>,
}

pub fn roc_curve(scores: &[f64], labels: &[Label]) -> Result<RocCurve, EvalError> {
    check_inputs(scores, labels)?;
    let positives = labels.iter().filter(|&&l| l == Label::Fake).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(EvalError::SingleClassLabels);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![(0.0, 0.0)];
    let mut thresholds = vec![f64::INFINITY];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let cut = scores[order[i]];
        while i < order.len() && scores[order[i]] == cut {
            match labels[order[i]] {
                Label::Fake => tp += 1,
                Label::Authentic => fp += 1,
            }
            i += 1;
        }
        points.push((fp as f64 / negatives as f64, tp as f64 / positives as f64));
        thresholds.push(cut);
    }
    Ok(RocCurve { points, thresholds })
}

/// Trapezoidal area under `curve`.
pub fn auc(curve: &RocCurve) -> f64 {
    curve
        .points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
        .sum()
}

/// Confusion matrix at `threshold`, metrics, and ROC curve in one pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub confusion: ConfusionMatrix,
    pub metrics: MetricSet,
    pub roc: RocCurve,
}

pub fn evaluate(scores: &[f64], labels: &[Label], threshold: f64) -> Result<Evaluation, EvalError> {
    let roc = roc_curve(scores, labels)?;
    let confusion = confusion(scores, labels, threshold)?;
    let metrics = metrics(&confusion, auc(&roc))?;
    Ok(Evaluation {
        confusion,
        metrics,
        roc,
    })
}
