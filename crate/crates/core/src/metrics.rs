//! Confusion matrices and per-class classification reports.
//!
//! Undefined ratios (a class never predicted, or never present) are reported
//! as 0. Per-class accuracy is one-vs-rest, `(TP + TN) / N`.

use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rows are true classes, columns predicted classes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<u64>>,
    class_names: Vec<String>,
}

impl ConfusionMatrix {
    pub fn new(class_names: Vec<String>) -> Self {
        let n = class_names.len();
        ConfusionMatrix {
            counts: vec![vec![0; n]; n],
            class_names,
        }
    }

    pub fn from_counts(counts: Vec<Vec<u64>>, class_names: Vec<String>) -> Result<Self> {
        if counts.len() != class_names.len() || counts.iter().any(|r| r.len() != class_names.len()) {
            return Err(Error::Shape(format!(
                "confusion counts must be {0}x{0}",
                class_names.len()
            )));
        }
        Ok(ConfusionMatrix { counts, class_names })
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth][pred]
    }

    pub fn record(&mut self, truth: usize, pred: usize) -> Result<()> {
        let n = self.n_classes();
        if truth >= n || pred >= n {
            return Err(Error::Shape(format!("class index ({truth}, {pred}) out of range for {n} classes")));
        }
        self.counts[truth][pred] += 1;
        Ok(())
    }

    /// Adds another matrix over the same classes.
    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if other.class_names != self.class_names {
            return Err(Error::Shape("merging confusion matrices over different classes".into()));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        Ok(())
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> u64 {
        (0..self.n_classes()).map(|i| self.counts[i][i]).sum()
    }

    /// `(estimated, correct, total)` per class.
    pub fn class_counts(&self) -> Vec<ClassCounts> {
        (0..self.n_classes())
            .map(|c| ClassCounts {
                name: self.class_names[c].clone(),
                estimated: self.counts.iter().map(|r| r[c]).sum(),
                correct: self.counts[c][c],
                total: self.counts[c].iter().sum(),
            })
            .collect()
    }

    pub fn write_counts_csv(&self, w: impl Write) -> Result<()> {
        self.write_csv(w, |v, _| v.to_string())
    }

    /// Each row normalised to percent of that class's support.
    pub fn write_percent_csv(&self, w: impl Write) -> Result<()> {
        self.write_csv(w, |v, row_total| {
            let p = if row_total == 0 { 0.0 } else { 100.0 * v as f64 / row_total as f64 };
            format!("{p:.2}")
        })
    }

    fn write_csv(&self, w: impl Write, cell: impl Fn(u64, u64) -> String) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let csv_err = |e: csv::Error| Error::Config(format!("writing confusion matrix: {e}"));
        let header: Vec<&str> = std::iter::once("true\\pred")
            .chain(self.class_names.iter().map(String::as_str))
            .collect();
        out.write_record(&header).map_err(csv_err)?;
        for (name, row) in self.class_names.iter().zip(&self.counts) {
            let total: u64 = row.iter().sum();
            let cells: Vec<String> = std::iter::once(name.clone())
                .chain(row.iter().map(|&v| cell(v, total)))
                .collect();
            out.write_record(&cells).map_err(csv_err)?;
        }
        out.flush().map_err(|e| Error::io("confusion matrix", e))
    }
}

/// Builds a confusion matrix from predicted and true class indices.
pub fn confusion(preds: &[usize], labels: &[usize], class_names: &[String]) -> Result<ConfusionMatrix> {
    if preds.len() != labels.len() {
        return Err(Error::LengthMismatch {
            what: "predictions vs labels",
            left: preds.len(),
            right: labels.len(),
        });
    }
    let mut cm = ConfusionMatrix::new(class_names.to_vec());
    for (&p, &t) in preds.iter().zip(labels) {
        cm.record(t, p)?;
    }
    Ok(cm)
}

/// Column sum, diagonal entry and row sum of one class.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub name: String,
    pub estimated: u64,
    pub correct: u64,
    pub total: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub name: String,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
    pub estimated: u64,
    pub correct: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub classes: Vec<ClassMetrics>,
    pub accuracy: f64,
    /// Support-weighted averages.
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub total: u64,
    pub correct: u64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Precision, recall and F1 of one class from its counts.
pub fn class_metrics(c: &ClassCounts, grand_total: u64) -> ClassMetrics {
    let precision = ratio(c.correct, c.estimated);
    let recall = ratio(c.correct, c.total);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    let tn = grand_total + c.correct - c.total - c.estimated;
    ClassMetrics {
        name: c.name.clone(),
        accuracy: ratio(c.correct + tn, grand_total),
        precision,
        recall,
        f1,
        support: c.total,
        estimated: c.estimated,
        correct: c.correct,
    }
}

/// Report from per-class counts alone; `grand_total` is the number of records.
pub fn report_from_counts(counts: &[ClassCounts], grand_total: u64) -> Result<ClassReport> {
    if grand_total == 0 || counts.is_empty() {
        return Err(Error::EmptyInput);
    }
    let support: u64 = counts.iter().map(|c| c.total).sum();
    let predicted: u64 = counts.iter().map(|c| c.estimated).sum();
    if support != grand_total || predicted != grand_total || counts.iter().any(|c| c.correct > c.total.min(c.estimated)) {
        return Err(Error::Shape(format!(
            "class counts are inconsistent with {grand_total} records"
        )));
    }
    let classes: Vec<ClassMetrics> = counts.iter().map(|c| class_metrics(c, grand_total)).collect();
    let weighted = |f: fn(&ClassMetrics) -> f64| {
        classes.iter().map(|m| f(m) * m.support as f64).sum::<f64>() / grand_total as f64
    };
    let correct = counts.iter().map(|c| c.correct).sum();
    Ok(ClassReport {
        accuracy: ratio(correct, grand_total),
        precision: weighted(|m| m.precision),
        recall: weighted(|m| m.recall),
        f1: weighted(|m| m.f1),
        classes,
        total: grand_total,
        correct,
    })
}

pub fn report(cm: &ConfusionMatrix) -> Result<ClassReport> {
    report_from_counts(&cm.class_counts(), cm.total())
}

impl ClassReport {
    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let csv_err = |e: csv::Error| Error::Config(format!("writing report: {e}"));
        out.write_record(["class", "accuracy", "f1", "precision", "recall", "estimated", "correct", "total"])
            .map_err(csv_err)?;
        for m in &self.classes {
            out.write_record([
                m.name.clone(),
                format!("{:.6}", m.accuracy),
                format!("{:.6}", m.f1),
                format!("{:.6}", m.precision),
                format!("{:.6}", m.recall),
                m.estimated.to_string(),
                m.correct.to_string(),
                m.support.to_string(),
            ])
            .map_err(csv_err)?;
        }
        out.write_record([
            "weighted".to_string(),
            format!("{:.6}", self.accuracy),
            format!("{:.6}", self.f1),
            format!("{:.6}", self.precision),
            format!("{:.6}", self.recall),
            self.total.to_string(),
            self.correct.to_string(),
            self.total.to_string(),
        ])
        .map_err(csv_err)?;
        out.flush().map_err(|e| Error::io("report", e))
    }

    /// Aligned plain-text table, percentages for the ratios.
    pub fn to_text(&self) -> String {
        let width = self
            .classes
            .iter()
            .map(|m| m.name.len())
            .chain(std::iter::once(5))
            .max()
            .unwrap_or(5);
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<width$}  {:>9}  {:>9}  {:>9}  {:>9}  {:>9}  {:>9}  {:>9}",
            "class", "accuracy", "f1", "precision", "recall", "estimated", "correct", "total"
        );
        for m in &self.classes {
            let _ = writeln!(
                s,
                "{:<width$}  {:>9.4}  {:>9.4}  {:>9.4}  {:>9.4}  {:>9}  {:>9}  {:>9}",
                m.name,
                100.0 * m.accuracy,
                100.0 * m.f1,
                100.0 * m.precision,
                100.0 * m.recall,
                m.estimated,
                m.correct,
                m.support
            );
        }
        let _ = writeln!(
            s,
            "Accuracy = {:.4}, F1 = {:.4}, Precision = {:.4}, Recall = {:.4}",
            self.accuracy, self.f1, self.precision, self.recall
        );
        let _ = writeln!(s, "Records correctly classified: {} of {}", self.correct, self.total);
        s
    }
}
