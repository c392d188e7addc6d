//! Confusion counts, F-beta, TPR/FPR and rank-based ROC AUC.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn new(tp: u64, fp: u64, tn: u64, fn_: u64) -> ConfusionCounts {
        ConfusionCounts { tp, fp, tn, fn_ }
    }

    pub fn record(&mut self, predicted: bool, actual: bool) {
        match (predicted, actual) {
            (true, true) => self.tp += 1,
            (true, false) => self.fp += 1,
            (false, false) => self.tn += 1,
            (false, true) => self.fn_ += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

/// `(1+β²)·P·R / (β²·P + R)`; 0 when there are no true positives.
pub fn f_beta(c: &ConfusionCounts, beta: f64) -> Result<f64> {
    if c.total() == 0 {
        return Err(Error::UndefinedMetric("F-beta of an empty confusion matrix".into()));
    }
    if !(beta > 0.0) {
        return Err(Error::Config(format!("beta must be positive, got {beta}")));
    }
    if c.tp == 0 {
        return Ok(0.0);
    }
    let p = c.tp as f64 / (c.tp + c.fp) as f64;
    let r = c.tp as f64 / (c.tp + c.fn_) as f64;
    let b2 = beta * beta;
    Ok((1.0 + b2) * p * r / (b2 * p + r))
}

/// `tp / (tp + fn)`, or 0 without positives.
pub fn tpr(c: &ConfusionCounts) -> f64 {
    let pos = c.tp + c.fn_;
    if pos == 0 {
        0.0
    } else {
        c.tp as f64 / pos as f64
    }
}

/// `fp / (fp + tn)`, or 0 without negatives.
pub fn fpr(c: &ConfusionCounts) -> f64 {
    let neg = c.fp + c.tn;
    if neg == 0 {
        0.0
    } else {
        c.fp as f64 / neg as f64
    }
}

/// Mann-Whitney AUC from average ranks: `P(s₊ > s₋) + ½ P(s₊ = s₋)`.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            got: scores.len(),
        });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Validation("AUC scores contain NaN".into()));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedMetric("AUC needs both classes".into()));
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        // ranks are 1-based; tied block i..=j shares the average rank
        let avg = (i + j + 2) as f64 / 2.0;
        for &k in &idx[i..=j] {
            if labels[k] {
                rank_sum_pos += avg;
            }
        }
        i = j + 1;
    }
    let np = n_pos as f64;
    Ok((rank_sum_pos - np * (np + 1.0) / 2.0) / (np * n_neg as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub f1: f64,
    pub f2: f64,
    pub tpr: f64,
    pub fpr: f64,
    pub auc: f64,
    pub counts: ConfusionCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub user_id: String,
    pub label: bool,
    pub score: f64,
}

/// Scores predictions against gold labels; both must cover the same ids.
/// AUC is 0.5 if the gold labels hold a single class.
pub fn evaluate(predictions: &[Prediction], gold: &[(String, bool)]) -> Result<MetricsReport> {
    let gold_map: HashMap<&str, bool> = gold.iter().map(|(id, l)| (id.as_str(), *l)).collect();
    let pred_ids: HashSet<&str> = predictions.iter().map(|p| p.user_id.as_str()).collect();
    let mut missing: Vec<&str> = gold_map.keys().filter(|id| !pred_ids.contains(*id)).copied().collect();
    let mut extra: Vec<&str> = pred_ids.iter().filter(|id| !gold_map.contains_key(*id)).copied().collect();
    if !missing.is_empty() || !extra.is_empty() || pred_ids.len() != predictions.len() {
        missing.sort_unstable();
        extra.sort_unstable();
        return Err(Error::Validation(format!(
            "prediction ids do not match gold ids; missing: [{}], unexpected: [{}]",
            missing.join(", "),
            extra.join(", ")
        )));
    }
    let mut counts = ConfusionCounts::default();
    let mut labels = Vec::with_capacity(predictions.len());
    let mut scores = Vec::with_capacity(predictions.len());
    for p in predictions {
        let actual = gold_map[p.user_id.as_str()];
        counts.record(p.label, actual);
        labels.push(actual);
        scores.push(p.score);
    }
    let auc = match roc_auc(&scores, &labels) {
        Ok(a) => a,
        Err(Error::UndefinedMetric(_)) => 0.5,
        Err(e) => return Err(e),
    };
    Ok(MetricsReport {
        f1: f_beta(&counts, 1.0)?,
        f2: f_beta(&counts, 2.0)?,
        tpr: tpr(&counts),
        fpr: fpr(&counts),
        auc,
        counts,
    })
}
