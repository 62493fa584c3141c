//! Metrics, history and ensemble-spec file formats.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use fer_core::eval::ErrorRow;
use fer_core::train::EpochRecord;
use fer_core::{ConfusionMatrix, EmotionLabel, NUM_CLASSES};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: EmotionLabel,
    pub support: u64,
    pub recall: Option<f64>,
    pub misclassification_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub samples: u64,
    pub accuracy: Option<f64>,
    pub per_class: Vec<ClassMetrics>,
    /// Rows are true labels, columns predictions, canonical class order.
    pub confusion: [[u64; NUM_CLASSES]; NUM_CLASSES],
}

impl Metrics {
    pub fn from_confusion(cm: &ConfusionMatrix) -> Self {
        let rows = cm.row_sums();
        Self {
            samples: cm.total(),
            accuracy: cm.accuracy(),
            per_class: EmotionLabel::ALL
                .iter()
                .map(|&label| ClassMetrics {
                    label,
                    support: rows[label.index()],
                    recall: cm.recall(label.index()),
                    misclassification_rate: cm.misclassification_rate(label.index()),
                })
                .collect(),
            confusion: cm.counts,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metrics serialize")
    }

    /// Aligned text: the confusion matrix followed by per-class recall.
    pub fn to_table(&self) -> String {
        let names: Vec<&str> = EmotionLabel::ALL.iter().map(|l| l.name()).collect();
        let width = names.iter().map(|n| n.len()).max().unwrap_or(0).max(
            self.confusion.iter().flatten().map(|v| v.to_string().len()).max().unwrap_or(1),
        );
        let mut s = String::new();
        let _ = write!(s, "{:>w$}", "true\\pred", w = width.max(9));
        for n in &names {
            let _ = write!(s, " {n:>width$}");
        }
        s.push('\n');
        for (i, row) in self.confusion.iter().enumerate() {
            let _ = write!(s, "{:>w$}", names[i], w = width.max(9));
            for v in row {
                let _ = write!(s, " {v:>width$}");
            }
            s.push('\n');
        }
        s.push('\n');
        for c in &self.per_class {
            let pct = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{:.1}%", v * 100.0));
            let _ = writeln!(
                s,
                "{:>9} support {:>6}  recall {:>6}  misclassified {:>6}",
                c.label.name(),
                c.support,
                pct(c.recall),
                pct(c.misclassification_rate)
            );
        }
        let acc = self.accuracy.map_or("n/a".to_string(), |a| format!("{:.2}%", a * 100.0));
        let _ = writeln!(s, "accuracy {acc} over {} samples", self.samples);
        s
    }
}

fn write_lines<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut out = Vec::new();
    for r in rows {
        serde_json::to_writer(&mut out, r).expect("row serializes");
        out.push(b'\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn write_error_report(path: &Path, rows: &[ErrorRow]) -> Result<()> {
    write_lines(path, rows)
}

/// Appends one epoch record to a JSONL history file.
pub fn append_history(path: &Path, record: &EpochRecord) -> Result<()> {
    let mut f = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    let mut line = serde_json::to_vec(record).expect("record serializes");
    line.push(b'\n');
    f.write_all(&line).map_err(|e| Error::io(path, e))
}

pub fn read_history(path: &Path) -> Result<Vec<EpochRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Row {
                origin: path.display().to_string(),
                row: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberSpec {
    pub weights_path: PathBuf,
    #[serde(default)]
    pub tta: bool,
}

/// Reads a JSON list of members; relative paths resolve against the spec's
/// directory.
pub fn read_ensemble_spec(path: &Path) -> Result<Vec<MemberSpec>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut members: Vec<MemberSpec> =
        serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    if members.is_empty() {
        return Err(Error::Format(format!("{}: ensemble needs at least one member", path.display())));
    }
    let base = path.parent().unwrap_or(Path::new("."));
    for m in &mut members {
        if m.weights_path.is_relative() {
            m.weights_path = base.join(&m.weights_path);
        }
    }
    Ok(members)
}
