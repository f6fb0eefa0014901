//! Confusion matrix and orientation-error metrics.
//!
//! All counting is done in integers; each metric is a single division at the end.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::{OrientationClass, NUM_CLASSES, SECTOR_DEGREES};

/// Rows are true labels, columns are predictions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; NUM_CLASSES]; NUM_CLASSES],
}

/// Circular distance between two classes, in sectors (0..=4).
fn sector_distance(a: usize, b: usize) -> u64 {
    let d = (a + NUM_CLASSES - b) % NUM_CLASSES;
    d.min(NUM_CLASSES - d) as u64
}

pub fn confusion(preds: &[OrientationClass], labels: &[OrientationClass]) -> Result<ConfusionMatrix> {
    if preds.len() != labels.len() {
        return Err(Error::InvalidArgument(format!(
            "{} predictions for {} labels",
            preds.len(),
            labels.len()
        )));
    }
    if preds.is_empty() {
        return Err(Error::Empty { what: "prediction list" });
    }
    let mut cm = ConfusionMatrix::default();
    for (p, t) in preds.iter().zip(labels) {
        cm.counts[t.index()][p.index()] += 1;
    }
    Ok(cm)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub total: u64,
    pub correct: u64,
    pub accuracy: f64,
    /// Σ count · angular distance, degrees. Exact integer.
    pub weighted_error_degrees: u64,
    pub mean_orientation_error_degrees: f64,
    /// Misclassified samples whose prediction is one sector (45°) away.
    pub nearest_label_errors: u64,
    /// `None` when nothing was misclassified.
    pub nearest_label_fraction: Option<f64>,
}

impl ConfusionMatrix {
    pub fn from_counts(counts: [[u64; NUM_CLASSES]; NUM_CLASSES]) -> Self {
        ConfusionMatrix { counts }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..NUM_CLASSES).map(|i| self.counts[i][i]).sum()
    }

    fn nonempty_total(&self) -> Result<u64> {
        match self.total() {
            0 => Err(Error::Empty { what: "confusion matrix" }),
            n => Ok(n),
        }
    }

    pub fn accuracy(&self) -> Result<f64> {
        let total = self.nonempty_total()?;
        Ok(self.trace() as f64 / total as f64)
    }

    /// `Σ_{t,p} counts[t][p] · angular_difference(45t, 45p)`, in whole degrees.
    pub fn weighted_error_degrees(&self) -> u64 {
        let sector = SECTOR_DEGREES as u64;
        let mut sum = 0;
        for (t, row) in self.counts.iter().enumerate() {
            for (p, &n) in row.iter().enumerate() {
                sum += n * sector_distance(t, p) * sector;
            }
        }
        sum
    }

    /// Mean angular distance between true and predicted class centres over
    /// all samples; correct predictions contribute zero.
    pub fn mean_orientation_error(&self) -> Result<f64> {
        let total = self.nonempty_total()?;
        Ok(self.weighted_error_degrees() as f64 / total as f64)
    }

    pub fn nearest_label_errors(&self) -> u64 {
        let mut n = 0;
        for (t, row) in self.counts.iter().enumerate() {
            for (p, &c) in row.iter().enumerate() {
                if sector_distance(t, p) == 1 {
                    n += c;
                }
            }
        }
        n
    }

    /// Share of misclassified samples that landed in an adjacent sector.
    pub fn nearest_label_fraction(&self) -> Result<f64> {
        let errors = self.total() - self.trace();
        if errors == 0 {
            return Err(Error::InvalidArgument("no misclassifications; nearest-label fraction undefined".into()));
        }
        Ok(self.nearest_label_errors() as f64 / errors as f64)
    }

    pub fn metrics(&self) -> Result<Metrics> {
        Ok(Metrics {
            total: self.nonempty_total()?,
            correct: self.trace(),
            accuracy: self.accuracy()?,
            weighted_error_degrees: self.weighted_error_degrees(),
            mean_orientation_error_degrees: self.mean_orientation_error()?,
            nearest_label_errors: self.nearest_label_errors(),
            nearest_label_fraction: self.nearest_label_fraction().ok(),
        })
    }

    /// CSV with a `degrees` header row and column, true labels as rows.
    pub fn to_csv(&self) -> String {
        let header: Vec<String> = (0..NUM_CLASSES).map(|c| (c * 45).to_string()).collect();
        let mut out = format!("degrees,{}\n", header.join(","));
        for (t, row) in self.counts.iter().enumerate() {
            let cells: Vec<String> = row.iter().map(u64::to_string).collect();
            let _ = writeln!(out, "{},{}", t * 45, cells.join(","));
        }
        out
    }

    /// Parses the layout written by [`Self::to_csv`].
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        lines.next().ok_or(Error::Empty { what: "confusion CSV" })?;
        let mut cm = ConfusionMatrix::default();
        let mut rows = 0;
        for (t, line) in lines.enumerate() {
            if t >= NUM_CLASSES {
                return Err(Error::Parse("confusion CSV has more than 8 rows".into()));
            }
            let cells: Vec<&str> = line.split(',').map(str::trim).collect();
            if cells.len() != NUM_CLASSES + 1 {
                return Err(Error::Parse(format!("confusion CSV row {} has {} cells", t + 1, cells.len())));
            }
            for p in 0..NUM_CLASSES {
                cm.counts[t][p] = cells[p + 1]
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad count {:?}", cells[p + 1])))?;
            }
            rows += 1;
        }
        if rows != NUM_CLASSES {
            return Err(Error::Parse(format!("confusion CSV has {rows} rows, expected 8")));
        }
        Ok(cm)
    }

    /// Adds `k` (mod 8) to every true and predicted label.
    pub fn rotated(&self, k: usize) -> Self {
        let mut out = ConfusionMatrix::default();
        for t in 0..NUM_CLASSES {
            for p in 0..NUM_CLASSES {
                out.counts[(t + k) % NUM_CLASSES][(p + k) % NUM_CLASSES] = self.counts[t][p];
            }
        }
        out
    }
}
