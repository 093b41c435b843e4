//! Confusion counts, precision/recall/F1 and ROC analysis.

use std::fmt::Write as _;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    pub threshold: f64,
}

fn check_pair(scores: &[f64], labels: &[u8]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch {
            expected: scores.len(),
            actual: labels.len(),
        });
    }
    if scores.is_empty() {
        return Err(Error::EmptyInput);
    }
    if let Some(&bad) = labels.iter().find(|&&y| y > 1) {
        return Err(Error::InvalidLabel(bad));
    }
    Ok(())
}

/// Counts at a threshold on probability-of-class-1 `scores`.
///
/// With `positive_class = 0` the positive-class score is `1 - score` and
/// label 0 counts as positive.
pub fn confusion_at_threshold(
    scores: &[f64],
    labels: &[u8],
    threshold: f64,
    positive_class: u8,
) -> Result<ConfusionCounts> {
    check_pair(scores, labels)?;
    if positive_class > 1 {
        return Err(Error::InvalidLabel(positive_class));
    }
    let mut c = ConfusionCounts::default();
    for (&s, &y) in scores.iter().zip(labels) {
        let score = if positive_class == 1 { s } else { 1.0 - s };
        let predicted = score >= threshold;
        let actual = y == positive_class;
        match (predicted, actual) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// `(precision, recall, f1)`; every 0/0 resolves to 0.
pub fn precision_recall_f1(c: &ConfusionCounts) -> (f64, f64, f64) {
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    (precision, recall, f1)
}

fn class_counts(labels: &[u8]) -> Result<(usize, usize)> {
    let pos = labels.iter().filter(|&&y| y == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClassInput);
    }
    Ok((pos, neg))
}

/// Area under the ROC curve via the Mann-Whitney rank sum, ties at midrank.
pub fn roc_auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    check_pair(scores, labels)?;
    let (pos, neg) = class_counts(labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // Twice the rank sum keeps midranks integral.
    let mut doubled_rank_sum: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // 1-based ranks i+1 ..= j+1 share the midrank (i + j + 2) / 2
        let doubled_mid = (i + j + 2) as u128;
        let tied_pos = order[i..=j].iter().filter(|&&k| labels[k] == 1).count() as u128;
        doubled_rank_sum += doubled_mid * tied_pos;
        i = j + 1;
    }
    let p = pos as u128;
    // U = R - P(P+1)/2, doubled
    let doubled_u = doubled_rank_sum - p * (p + 1);
    Ok(doubled_u as f64 / (2.0 * pos as f64 * neg as f64))
}

/// ROC points at each distinct score, highest threshold first, starting
/// at (0, 0) and ending at (1, 1).
pub fn roc_curve(scores: &[f64], labels: &[u8]) -> Result<Vec<RocPoint>> {
    check_pair(scores, labels)?;
    let (pos, neg) = class_counts(labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![RocPoint {
        fpr: 0.0,
        tpr: 0.0,
        threshold: f64::INFINITY,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let threshold = scores[order[i]];
        while i < order.len() && scores[order[i]] == threshold {
            if labels[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            fpr: fp as f64 / neg as f64,
            tpr: tp as f64 / pos as f64,
            threshold,
        });
    }
    Ok(points)
}

/// Trapezoidal area under a list of ROC points.
pub fn trapezoid_area(points: &[RocPoint]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[0].tpr + w[1].tpr) / 2.0)
        .sum()
}

pub fn roc_curve_csv(points: &[RocPoint]) -> String {
    let mut out = String::from("threshold,fpr,tpr\n");
    for p in points {
        let _ = writeln!(out, "{},{},{}", p.threshold, p.fpr, p.tpr);
    }
    out
}

/// Threshold-0.5 metrics for both choices of positive class plus ROC AUC.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub n: usize,
    pub positives: usize,
    pub roc_auc: f64,
    pub threshold: f64,
    /// Positive class 0 (non-default), the headline F1.
    pub majority: ClassMetrics,
    /// Positive class 1 (default).
    pub minority: ClassMetrics,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassMetrics {
    pub counts: ConfusionCounts,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn class_metrics(scores: &[f64], labels: &[u8], threshold: f64, class: u8) -> Result<ClassMetrics> {
    let counts = confusion_at_threshold(scores, labels, threshold, class)?;
    let (precision, recall, f1) = precision_recall_f1(&counts);
    Ok(ClassMetrics {
        counts,
        precision,
        recall,
        f1,
    })
}

impl MetricReport {
    pub const THRESHOLD: f64 = 0.5;

    /// `scores` are probabilities of label 1.
    pub fn evaluate(scores: &[f64], labels: &[u8]) -> Result<Self> {
        let threshold = Self::THRESHOLD;
        Ok(Self {
            n: labels.len(),
            positives: labels.iter().filter(|&&y| y == 1).count(),
            roc_auc: roc_auc(scores, labels)?,
            threshold,
            majority: class_metrics(scores, labels, threshold, 0)?,
            minority: class_metrics(scores, labels, threshold, 1)?,
        })
    }

    /// Headline F1 (positive class 0).
    pub fn f1(&self) -> f64 {
        self.majority.f1
    }

    /// Flat `key=value` lines, each key prefixed with `prefix`.
    pub fn to_key_value(&self, prefix: &str) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{prefix}{k}={v}");
        };
        kv("n", self.n.to_string());
        kv("positives", self.positives.to_string());
        kv("roc_auc", format!("{:.6}", self.roc_auc));
        kv("threshold", self.threshold.to_string());
        kv("f1_positive_class", "0".to_string());
        for (tag, m) in [("class0", &self.majority), ("class1", &self.minority)] {
            kv(&format!("{tag}_precision"), format!("{:.6}", m.precision));
            kv(&format!("{tag}_recall"), format!("{:.6}", m.recall));
            kv(&format!("{tag}_f1"), format!("{:.6}", m.f1));
            kv(&format!("{tag}_tp"), m.counts.tp.to_string());
            kv(&format!("{tag}_fp"), m.counts.fp.to_string());
            kv(&format!("{tag}_tn"), m.counts.tn.to_string());
            kv(&format!("{tag}_fn"), m.counts.fn_.to_string());
        }
        out
    }

    pub const CSV_HEADER: &'static str =
        "n,positives,roc_auc,f1,precision,recall,f1_class1,precision_class1,recall_class1";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
            self.n,
            self.positives,
            self.roc_auc,
            self.majority.f1,
            self.majority.precision,
            self.majority.recall,
            self.minority.f1,
            self.minority.precision,
            self.minority.recall
        )
    }
}
