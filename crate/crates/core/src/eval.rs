//! Confusion matrices, mean class-wise accuracy and ROC operating points.

use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use crate::error::{param, Result};

/// `l × l` counts; rows are actual classes, columns predicted.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn num_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn row_sums(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    /// Row-normalised percentages (each non-empty row sums to 100).
    pub fn row_percent(&self) -> Vec<Vec<f64>> {
        self.counts
            .iter()
            .map(|r| {
                let s: u64 = r.iter().sum();
                r.iter()
                    .map(|&v| if s == 0 { 0.0 } else { 100.0 * v as f64 / s as f64 })
                    .collect()
            })
            .collect()
    }

    pub fn per_class_accuracy(&self) -> Result<Vec<f64>> {
        per_class_accuracy(&self.counts)
    }

    pub fn mean_classwise_accuracy(&self) -> Result<f64> {
        mean_classwise_accuracy(&self.counts)
    }
}

pub fn confusion_matrix(actual: &[usize], predicted: &[usize], l: usize) -> Result<ConfusionMatrix> {
    if actual.len() != predicted.len() {
        return Err(param(format!(
            "{} actual labels but {} predictions",
            actual.len(),
            predicted.len()
        )));
    }
    let mut counts = vec![vec![0u64; l]; l];
    for (&a, &p) in actual.iter().zip(predicted) {
        if a >= l || p >= l {
            return Err(param(format!("label pair ({a}, {p}) outside 0..{l}")));
        }
        counts[a][p] += 1;
    }
    Ok(ConfusionMatrix { counts })
}

/// Diagonal over row sum, per class. Accepts counts or proportions.
pub fn per_class_accuracy<V: ToPrimitive>(rows: &[Vec<V>]) -> Result<Vec<f64>> {
    rows.iter()
        .enumerate()
        .map(|(i, row)| {
            if row.len() != rows.len() {
                return Err(param(format!("confusion row {i} has {} columns", row.len())));
            }
            let vals: Vec<f64> = row.iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect();
            let total: f64 = vals.iter().sum();
            if !(total > 0.0) {
                return Err(param(format!("class {i} has no test samples")));
            }
            Ok(vals[i] / total)
        })
        .collect()
}

/// Arithmetic mean of the per-class accuracies.
pub fn mean_classwise_accuracy<V: ToPrimitive>(rows: &[Vec<V>]) -> Result<f64> {
    if rows.is_empty() {
        return Err(param("empty confusion matrix"));
    }
    let acc = per_class_accuracy(rows)?;
    Ok(acc.iter().sum::<f64>() / acc.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
}

/// Operating points of the rule `score ≥ t ⇒ positive` for every distinct
/// score `t`, preceded by `(0, 0)`. The lowest threshold always yields `(1, 1)`,
/// so there are `distinct + 1` points, ordered by fpr then tpr.
pub fn roc_points(scores: &[f64], actual: &[bool]) -> Result<Vec<RocPoint>> {
    if scores.len() != actual.len() {
        return Err(param(format!("{} scores for {} labels", scores.len(), actual.len())));
    }
    if let Some(s) = scores.iter().find(|s| !s.is_finite()) {
        return Err(param(format!("non-finite score {s}")));
    }
    let pos = actual.iter().filter(|&&a| a).count();
    let neg = actual.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(param("ROC needs at least one positive and one negative sample"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![RocPoint { fpr: 0.0, tpr: 0.0 }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let t = scores[order[i]];
        while i < order.len() && scores[order[i]] == t {
            if actual[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            fpr: fp as f64 / neg as f64,
            tpr: tp as f64 / pos as f64,
        });
    }
    Ok(points)
}

/// Trapezoidal area under a sorted point list.
pub fn auc_trapezoid(points: &[RocPoint]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0)
        .sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub class_names: Vec<String>,
    pub confusion: ConfusionMatrix,
    pub per_class_accuracy: Vec<f64>,
    pub mean_classwise_accuracy: f64,
    pub roc: Option<Vec<RocPoint>>,
}

impl EvaluationReport {
    /// `positive_scores` (class-1 score per sample) is used only for two-class problems.
    pub fn build(
        class_names: &[String],
        actual: &[usize],
        predicted: &[usize],
        positive_scores: Option<&[f64]>,
    ) -> Result<Self> {
        let l = class_names.len();
        let confusion = confusion_matrix(actual, predicted, l)?;
        let per_class_accuracy = confusion.per_class_accuracy()?;
        let mean_classwise_accuracy = per_class_accuracy.iter().sum::<f64>() / l as f64;
        let roc = match positive_scores {
            Some(s) if l == 2 => {
                let truth: Vec<bool> = actual.iter().map(|&a| a == 1).collect();
                Some(roc_points(s, &truth)?)
            }
            _ => None,
        };
        Ok(Self {
            class_names: class_names.to_vec(),
            confusion,
            per_class_accuracy,
            mean_classwise_accuracy,
            roc,
        })
    }

    /// Plain-text rendering: row-percent confusion matrix, per-class and mean
    /// class-wise accuracy, all to two decimals.
    pub fn render_text(&self) -> String {
        let width = self.class_names.iter().map(String::len).max().unwrap_or(0).max(8);
        let mut s = String::new();
        s.push_str("Confusion matrix (% of actual class; rows actual, columns predicted)\n");
        s.push_str(&format!("{:width$}", ""));
        for name in &self.class_names {
            s.push_str(&format!("  {name:>width$}"));
        }
        s.push('\n');
        for (name, row) in self.class_names.iter().zip(self.confusion.row_percent()) {
            s.push_str(&format!("{name:width$}"));
            for v in row {
                s.push_str(&format!("  {:>width$}", format!("{v:.2}")));
            }
            s.push('\n');
        }
        s.push_str("\nPer-class accuracy (%)\n");
        for (name, a) in self.class_names.iter().zip(&self.per_class_accuracy) {
            s.push_str(&format!("{name:width$}  {:.2}\n", 100.0 * a));
        }
        s.push_str(&format!(
            "\nMean class-wise accuracy (%): {:.2}\n",
            100.0 * self.mean_classwise_accuracy
        ));
        if let Some(roc) = &self.roc {
            s.push_str(&format!("ROC AUC: {:.4} ({} points)\n", auc_trapezoid(roc), roc.len()));
        }
        s
    }

    /// Two-column `fpr tpr` text with a header line.
    pub fn render_roc(&self) -> Option<String> {
        self.roc.as_ref().map(|pts| {
            let mut s = String::from("# fpr tpr\n");
            for p in pts {
                s.push_str(&format!("{} {}\n", p.fpr, p.tpr));
            }
            s
        })
    }
}
