//! Accuracy, confusion matrices, error analysis, soft voting and
//! test-time augmentation.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::augment::{tta_set, AugmentPolicy};
use crate::data::{image_batch, Dataset, EmotionLabel, NUM_CLASSES};
use crate::error::{arg_err, shape_err, Result};
use crate::model::Classifier;
use crate::GrayImage;

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(row: &[f32]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Counts keyed by (true label, predicted label).
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; NUM_CLASSES]; NUM_CLASSES],
}

impl ConfusionMatrix {
    pub fn from_predictions(probs: &[Vec<f32>], labels: &[usize]) -> Result<Self> {
        if probs.len() != labels.len() {
            return Err(arg_err!("{} predictions for {} labels", probs.len(), labels.len()));
        }
        let mut m = Self::default();
        for (row, &y) in probs.iter().zip(labels) {
            if row.len() != NUM_CLASSES {
                return Err(shape_err!("prediction row has {} classes, expected {NUM_CLASSES}", row.len()));
            }
            if y >= NUM_CLASSES {
                return Err(arg_err!("label {y} out of range"));
            }
            m.counts[y][argmax(row)] += 1;
        }
        Ok(m)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..NUM_CLASSES).map(|c| self.counts[c][c]).sum()
    }

    pub fn row_sums(&self) -> [u64; NUM_CLASSES] {
        self.counts.map(|r| r.iter().sum())
    }

    pub fn accuracy(&self) -> Option<f64> {
        let total = self.total();
        (total > 0).then(|| self.trace() as f64 / total as f64)
    }

    /// Recall of class `c`; `None` when the class has no samples.
    pub fn recall(&self, c: usize) -> Option<f64> {
        let n = self.row_sums()[c];
        (n > 0).then(|| self.counts[c][c] as f64 / n as f64)
    }

    /// `1 − recall(c)`.
    pub fn misclassification_rate(&self, c: usize) -> Option<f64> {
        self.recall(c).map(|r| 1.0 - r)
    }
}

/// Infer-mode probabilities for every sample, in dataset order.
pub fn predict_dataset<C: Classifier<f32> + ?Sized>(
    model: &C,
    dataset: &Dataset,
    batch_size: usize,
) -> Result<Vec<Vec<f32>>> {
    if batch_size == 0 {
        return Err(arg_err!("batch size must be positive"));
    }
    let mut out = Vec::with_capacity(dataset.len());
    for chunk in dataset.samples().chunks(batch_size) {
        let x = image_batch::<f32>(chunk.iter().map(|s| s.image()))?;
        let p = model.predict_probs(&x)?;
        let k = p.dims2()?[1];
        out.extend(p.data().chunks_exact(k).map(|r| r.to_vec()));
    }
    Ok(out)
}

pub fn confusion_matrix(probs: &[Vec<f32>], dataset: &Dataset) -> Result<ConfusionMatrix> {
    ConfusionMatrix::from_predictions(probs, &dataset.labels())
}

/// `trace(confusion) / N`.
pub fn accuracy(probs: &[Vec<f32>], dataset: &Dataset) -> Result<f64> {
    if dataset.is_empty() {
        return Err(arg_err!("accuracy of an empty dataset is undefined"));
    }
    let m = confusion_matrix(probs, dataset)?;
    Ok(m.trace() as f64 / m.total() as f64)
}

pub fn accuracy_of<C: Classifier<f32> + ?Sized>(model: &C, dataset: &Dataset, batch_size: usize) -> Result<f64> {
    accuracy(&predict_dataset(model, dataset, batch_size)?, dataset)
}

/// Arithmetic mean of probability rows.
///
/// Each class column is summed in sorted order in `f64`, which makes the
/// result exactly invariant to row order and exactly idempotent on identical
/// rows.
pub fn soft_vote<R: AsRef<[f32]>>(rows: &[R]) -> Result<Vec<f32>> {
    let first = rows.first().ok_or_else(|| arg_err!("soft vote over zero members"))?;
    let k = first.as_ref().len();
    for r in rows {
        let r = r.as_ref();
        if r.len() != k {
            return Err(shape_err!("soft vote rows differ in length ({} vs {k})", r.len()));
        }
        let s: f64 = r.iter().map(|&p| p as f64).sum();
        if (s - 1.0).abs() > 1e-5 || r.iter().any(|&p| !(p >= 0.0)) {
            return Err(arg_err!("soft vote input is not a probability row (sum {s})"));
        }
    }
    let mut column = vec![0.0f32; rows.len()];
    Ok((0..k)
        .map(|c| {
            for (dst, r) in column.iter_mut().zip(rows) {
                *dst = r.as_ref()[c];
            }
            column.sort_by(f32::total_cmp);
            let sum: f64 = column.iter().map(|&p| p as f64).sum();
            (sum / rows.len() as f64) as f32
        })
        .collect())
}

/// Soft vote over the predictions for the nine-image TTA set of `image`.
pub fn predict_tta<C: Classifier<f32> + ?Sized>(
    model: &C,
    image: &GrayImage,
    policy: &AugmentPolicy,
    seed: u64,
) -> Result<Vec<f32>> {
    let set = tta_set(image, policy, seed);
    let probs = model.predict_probs(&image_batch::<f32>(&set)?)?;
    let k = probs.dims2()?[1];
    let rows: Vec<&[f32]> = probs.data().chunks_exact(k).collect();
    soft_vote(&rows)
}

/// Single-image prediction, optionally TTA-averaged.
pub fn predict_image<C: Classifier<f32> + ?Sized>(
    model: &C,
    image: &GrayImage,
    tta: Option<(&AugmentPolicy, u64)>,
) -> Result<Vec<f32>> {
    match tta {
        Some((policy, seed)) => predict_tta(model, image, policy, seed),
        None => Ok(model.predict_probs(&image_batch::<f32>([image])?)?.into_data()),
    }
}

pub struct EnsembleMember<'a> {
    pub model: &'a dyn Classifier<f32>,
    pub tta: bool,
}

/// Soft vote across members, each optionally TTA-averaged first.
pub fn ensemble_predict(
    members: &[EnsembleMember<'_>],
    image: &GrayImage,
    policy: &AugmentPolicy,
    seed: u64,
) -> Result<Vec<f32>> {
    let rows = members
        .iter()
        .map(|m| predict_image(m.model, image, m.tta.then_some((policy, seed))))
        .collect::<Result<Vec<_>>>()?;
    soft_vote(&rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    pub source_id: String,
    pub true_label: EmotionLabel,
    pub predicted: EmotionLabel,
    /// Three most probable classes, descending.
    pub top3: [(EmotionLabel, f32); 3],
}

/// Misclassified samples grouped by (true, predicted) cell in index order;
/// within a cell sorted by predicted-class confidence, descending, and
/// truncated to `top_k` rows.
pub fn error_report(probs: &[Vec<f32>], dataset: &Dataset, top_k: usize) -> Result<Vec<ErrorRow>> {
    if probs.len() != dataset.len() {
        return Err(arg_err!("{} predictions for {} samples", probs.len(), dataset.len()));
    }
    let mut cells: Vec<Vec<(f32, ErrorRow)>> = vec![Vec::new(); NUM_CLASSES * NUM_CLASSES];
    for (row, sample) in probs.iter().zip(dataset.samples()) {
        if row.len() != NUM_CLASSES {
            return Err(shape_err!("prediction row has {} classes", row.len()));
        }
        let pred = argmax(row);
        let truth = sample.label().index();
        if pred == truth {
            continue;
        }
        let mut order: Vec<usize> = (0..NUM_CLASSES).collect();
        // stable sort keeps lower indices first on ties
        order.sort_by(|&a, &b| row[b].total_cmp(&row[a]));
        let top3 = core::array::from_fn(|i| (EmotionLabel::ALL[order[i]], row[order[i]]));
        cells[truth * NUM_CLASSES + pred].push((
            row[pred],
            ErrorRow {
                source_id: sample.source_id().into(),
                true_label: sample.label(),
                predicted: EmotionLabel::ALL[pred],
                top3,
            },
        ));
    }
    let mut out = Vec::new();
    for mut cell in cells {
        cell.sort_by(|a, b| b.0.total_cmp(&a.0));
        out.extend(cell.into_iter().take(top_k).map(|(_, r)| r));
    }
    Ok(out)
}
