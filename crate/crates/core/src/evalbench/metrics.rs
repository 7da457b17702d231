use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rows are true classes, columns predicted classes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    labels: Vec<String>,
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(labels: Vec<String>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::Config("confusion matrix needs at least one class".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for l in &labels {
            if !seen.insert(l) {
                return Err(Error::Config(format!("duplicate class label {l:?}")));
            }
        }
        let k = labels.len();
        Ok(Self {
            labels,
            counts: vec![vec![0; k]; k],
        })
    }

    pub fn from_counts(labels: Vec<String>, counts: Vec<Vec<u64>>) -> Result<Self> {
        let mut cm = Self::new(labels)?;
        let k = cm.labels.len();
        if counts.len() != k || counts.iter().any(|r| r.len() != k) {
            return Err(Error::Config(format!("counts must be a {k}x{k} grid")));
        }
        cm.counts = counts;
        Ok(cm)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn record(&mut self, truth: &str, predicted: &str) -> Result<()> {
        let unknown = |l: &str| Error::Config(format!("label {l:?} is not in the class set"));
        let t = self.index_of(truth).ok_or_else(|| unknown(truth))?;
        let p = self.index_of(predicted).ok_or_else(|| unknown(predicted))?;
        self.counts[t][p] += 1;
        Ok(())
    }

    pub fn get(&self, truth: &str, predicted: &str) -> Option<u64> {
        Some(self.counts[self.index_of(truth)?][self.index_of(predicted)?])
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// `(tp, fp, fn, tn)` of `class` against all others.
    pub fn one_vs_rest(&self, class: usize) -> (u64, u64, u64, u64) {
        let tp = self.counts[class][class];
        let row: u64 = self.counts[class].iter().sum();
        let col: u64 = self.counts.iter().map(|r| r[class]).sum();
        let fp = col - tp;
        let fn_ = row - tp;
        let tn = self.total() - tp - fp - fn_;
        (tp, fp, fn_, tn)
    }
}

/// Per-class scores. `None` marks a zero denominator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub specificity: Option<f64>,
    pub support: u64,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Harmonic mean of precision and recall.
pub fn f1_score(precision: f64, recall: f64) -> Option<f64> {
    let den = precision + recall;
    (den > 0.0).then(|| 2.0 * precision * recall / den)
}

pub fn class_metrics(cm: &ConfusionMatrix, class: &str) -> Result<ClassMetrics> {
    let idx = cm
        .index_of(class)
        .ok_or_else(|| Error::Config(format!("class {class:?} is not in the confusion matrix")))?;
    let (tp, fp, fn_, tn) = cm.one_vs_rest(idx);
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = match (precision, recall) {
        (Some(p), Some(r)) => f1_score(p, r),
        _ => None,
    };
    Ok(ClassMetrics {
        precision,
        recall,
        f1,
        specificity: ratio(tn, tn + fp),
        support: tp + fn_,
    })
}

/// Unweighted mean over classes, skipping undefined values.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MacroAverage {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub specificity: Option<f64>,
    /// How many classes were skipped for each metric, in the order above.
    pub skipped: [usize; 4],
}

pub fn macro_average<'a>(metrics: impl IntoIterator<Item = &'a ClassMetrics>) -> MacroAverage {
    let mut sums = [0.0; 4];
    let mut counts = [0usize; 4];
    let mut skipped = [0usize; 4];
    for m in metrics {
        for (i, v) in [m.precision, m.recall, m.f1, m.specificity].into_iter().enumerate() {
            match v {
                Some(v) => {
                    sums[i] += v;
                    counts[i] += 1;
                }
                None => skipped[i] += 1,
            }
        }
    }
    let mean = |i: usize| (counts[i] > 0).then(|| sums[i] / counts[i] as f64);
    MacroAverage {
        precision: mean(0),
        recall: mean(1),
        f1: mean(2),
        specificity: mean(3),
        skipped,
    }
}

/// Plain-text table with one row per class.
pub fn metrics_table(metrics: &BTreeMap<String, ClassMetrics>) -> String {
    let headers = ["Disease", "Precision", "Recall/Sensitivity", "F1 Score", "Specificity"];
    let fmt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.4}"));
    let rows: Vec<[String; 5]> = metrics
        .iter()
        .map(|(label, m)| {
            [
                label.clone(),
                fmt(m.precision),
                fmt(m.recall),
                fmt(m.f1),
                fmt(m.specificity),
            ]
        })
        .collect();
    let mut widths = headers.map(str::len);
    for r in &rows {
        for (w, cell) in widths.iter_mut().zip(r) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    let line = |out: &mut String, cells: &[&str]| {
        let padded: Vec<String> = cells
            .iter()
            .zip(widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect();
        let _ = writeln!(out, "| {} |", padded.join(" | "));
    };
    line(&mut out, &headers);
    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    let _ = writeln!(out, "|-{}-|", rule.join("-|-"));
    for r in &rows {
        let cells: Vec<&str> = r.iter().map(String::as_str).collect();
        line(&mut out, &cells);
    }
    out
}
