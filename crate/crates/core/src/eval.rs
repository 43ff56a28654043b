//! Exact-match span evaluation with per-type and micro-averaged scores.
//!
//! A prediction counts only if document, start, end and label all match a
//! gold span. Ratios with a zero denominator are 0. Percentages are rounded
//! half-up to two decimals from the exact fractions, using integer
//! arithmetic so that values like 72.725 round the same way everywhere.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::annotations::AnnotationSet;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("gold and predictions cover different documents")]
    DocMismatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Counts {
    pub fn new(tp: usize, fp: usize, fn_: usize) -> Self {
        Counts { tp, fp, fn_ }
    }
}

impl std::ops::AddAssign for Counts {
    fn add_assign(&mut self, o: Counts) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.fn_ += o.fn_;
    }
}

/// Per-type true positives, false positives and false negatives.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct ConfusionCounts {
    pub per_type: BTreeMap<String, Counts>,
}

impl ConfusionCounts {
    pub fn total(&self) -> Counts {
        let mut t = Counts::default();
        for c in self.per_type.values() {
            t += *c;
        }
        t
    }
}

/// A percentage held as integer hundredths, e.g. `7077` is 70.77.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Percent(pub u32);

impl Percent {
    /// `100 * num / den` rounded half-up to two decimals; 0 when `den == 0`.
    pub fn from_ratio(num: u64, den: u64) -> Percent {
        if den == 0 {
            return Percent(0);
        }
        // hundredths = floor(10000 * num / den + 1/2)
        Percent(((20_000 * num + den) / (2 * den)) as u32)
    }

    pub fn value(self) -> f64 {
        f64::from(self.0) / 100.0
    }
}

impl fmt::Display for Percent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = format!("{}.{:02}", self.0 / 100, self.0 % 100);
        f.pad(&s)
    }
}

impl Serialize for Percent {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.value())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Prf {
    pub precision: Percent,
    pub recall: Percent,
    pub f_score: Percent,
}

/// Precision, recall and F-score of one count triple.
///
/// F is taken from the exact ratio `2tp / (2tp + fp + fn)`, which equals
/// `2PR / (P + R)` before rounding.
pub fn prf(c: Counts) -> Prf {
    let (tp, fp, fn_) = (c.tp as u64, c.fp as u64, c.fn_ as u64);
    Prf {
        precision: Percent::from_ratio(tp, tp + fp),
        recall: Percent::from_ratio(tp, tp + fn_),
        f_score: Percent::from_ratio(2 * tp, 2 * tp + fp + fn_),
    }
}

/// Matches predictions against gold. Each gold span absorbs at most one
/// identical prediction; duplicates beyond that are false positives.
pub fn confusion(gold: &AnnotationSet, pred: &AnnotationSet) -> Result<ConfusionCounts, EvalError> {
    if gold.doc_ids() != pred.doc_ids() {
        return Err(EvalError::DocMismatch);
    }
    let mut per_type: BTreeMap<String, Counts> = BTreeMap::new();
    for (doc_id, gold_ms) in gold.iter() {
        let mut remaining: BTreeMap<(usize, usize, &str), usize> = BTreeMap::new();
        for g in gold_ms {
            *remaining.entry(g.key()).or_insert(0) += 1;
        }
        for p in pred.mentions(doc_id) {
            let entry = per_type.entry(p.label.clone()).or_default();
            match remaining.get_mut(&p.key()) {
                Some(n) if *n > 0 => {
                    *n -= 1;
                    entry.tp += 1;
                }
                _ => entry.fp += 1,
            }
        }
        for ((_, _, label), n) in remaining {
            per_type.entry(label.to_string()).or_default().fn_ += n;
        }
    }
    Ok(ConfusionCounts { per_type })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TypeMetrics {
    #[serde(flatten)]
    pub scores: Prf,
    #[serde(flatten)]
    pub counts: Counts,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub per_type: BTreeMap<String, TypeMetrics>,
    pub micro: TypeMetrics,
}

impl MetricsReport {
    pub fn from_counts(counts: &ConfusionCounts) -> Self {
        let per_type = counts
            .per_type
            .iter()
            .map(|(t, c)| (t.clone(), TypeMetrics { scores: prf(*c), counts: *c }))
            .collect();
        let total = counts.total();
        MetricsReport { per_type, micro: TypeMetrics { scores: prf(total), counts: total } }
    }

    /// Aligned plain-text table, one row per type plus a micro row.
    pub fn render_table(&self) -> String {
        let width = self.per_type.keys().map(String::len).max().unwrap_or(0).max(11);
        let mut out = format!(
            "{:<width$}  {:>9}  {:>7}  {:>7}  {:>5}  {:>5}  {:>5}\n",
            "Entity type", "Precision", "Recall", "F-score", "TP", "FP", "FN"
        );
        let row = |name: &str, m: &TypeMetrics| {
            format!(
                "{:<width$}  {:>9}  {:>7}  {:>7}  {:>5}  {:>5}  {:>5}\n",
                name, m.scores.precision, m.scores.recall, m.scores.f_score, m.counts.tp, m.counts.fp, m.counts.fn_
            )
        };
        for (t, m) in &self.per_type {
            out.push_str(&row(t, m));
        }
        out.push_str(&"-".repeat(width + 47));
        out.push('\n');
        out.push_str(&row("micro", &self.micro));
        out
    }
}

pub fn report(gold: &AnnotationSet, pred: &AnnotationSet) -> Result<MetricsReport, EvalError> {
    Ok(MetricsReport::from_counts(&confusion(gold, pred)?))
}
