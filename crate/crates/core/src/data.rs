//! Labels, samples and in-memory datasets.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{arg_err, shape_err, Error, Result};
use crate::{rng, GrayImage, Real, Tensor, IMAGE_SIDE};

pub const NUM_CLASSES: usize = 7;

/// The seven expression classes in FER2013 index order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmotionLabel {
    Angry = 0,
    Disgust = 1,
    Fear = 2,
    Happy = 3,
    Sad = 4,
    Surprise = 5,
    Neutral = 6,
}

impl EmotionLabel {
    pub const ALL: [EmotionLabel; NUM_CLASSES] = [
        EmotionLabel::Angry,
        EmotionLabel::Disgust,
        EmotionLabel::Fear,
        EmotionLabel::Happy,
        EmotionLabel::Sad,
        EmotionLabel::Surprise,
        EmotionLabel::Neutral,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    /// Lowercase name, also used as the class-directory name.
    pub fn name(self) -> &'static str {
        match self {
            EmotionLabel::Angry => "angry",
            EmotionLabel::Disgust => "disgust",
            EmotionLabel::Fear => "fear",
            EmotionLabel::Happy => "happy",
            EmotionLabel::Sad => "sad",
            EmotionLabel::Surprise => "surprise",
            EmotionLabel::Neutral => "neutral",
        }
    }
}

impl fmt::Display for EmotionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EmotionLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|l| l.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| arg_err!("unknown emotion label {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

/// One 48×48 grayscale face with pixels in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    image: GrayImage,
    label: EmotionLabel,
    source_id: String,
}

impl Sample {
    pub fn new(image: GrayImage, label: EmotionLabel, source_id: impl Into<String>) -> Result<Self> {
        if image.width() != IMAGE_SIDE || image.height() != IMAGE_SIDE {
            return Err(shape_err!(
                "sample must be {IMAGE_SIDE}x{IMAGE_SIDE}, got {}x{}",
                image.width(),
                image.height()
            ));
        }
        if let Some(p) = image.pixels().iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(arg_err!("pixel value {p} outside [0, 1]"));
        }
        Ok(Self {
            image,
            label,
            source_id: source_id.into(),
        })
    }

    pub fn image(&self) -> &GrayImage {
        &self.image
    }

    pub fn pixels(&self) -> &[f32] {
        self.image.pixels()
    }

    pub fn label(&self) -> EmotionLabel {
        self.label
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }
}

/// An ordered collection of samples with cached per-class counts.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: Vec<Sample>,
    split: Split,
    class_counts: [usize; NUM_CLASSES],
}

fn count(samples: &[Sample]) -> [usize; NUM_CLASSES] {
    let mut counts = [0; NUM_CLASSES];
    for s in samples {
        counts[s.label.index()] += 1;
    }
    counts
}

impl Dataset {
    pub fn new(samples: Vec<Sample>, split: Split) -> Self {
        let class_counts = count(&samples);
        Self {
            samples,
            split,
            class_counts,
        }
    }

    pub fn empty(split: Split) -> Self {
        Self::new(Vec::new(), split)
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Sample> {
        self.samples
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn with_split(mut self, split: Split) -> Self {
        self.split = split;
        self
    }

    pub fn class_counts(&self) -> [usize; NUM_CLASSES] {
        self.class_counts
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.label.index()).collect()
    }

    /// Concatenates datasets in order. The result takes the split of the
    /// first part (train when `parts` is empty).
    pub fn merge(parts: &[&Dataset]) -> Dataset {
        let split = parts.first().map_or(Split::Train, |d| d.split);
        let samples = parts.iter().flat_map(|d| d.samples.iter().cloned()).collect();
        Dataset::new(samples, split)
    }

    /// Per-class random partition: each class sends `round(fraction·n_c)`
    /// samples to the first output. Both outputs keep the input order.
    pub fn stratified_split(&self, fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
        if !(fraction > 0.0 && fraction < 1.0) {
            return Err(arg_err!("split fraction must be in (0, 1), got {fraction}"));
        }
        let mut first = alloc::vec![false; self.samples.len()];
        for label in EmotionLabel::ALL {
            let mut idx: Vec<usize> = (0..self.samples.len())
                .filter(|&i| self.samples[i].label == label)
                .collect();
            let take = libm::round(fraction * idx.len() as f64) as usize;
            let mut r = rng::rng(rng::derive_seed(seed, &[label.index() as u64]));
            idx.shuffle(&mut r);
            for &i in &idx[..take] {
                first[i] = true;
            }
        }
        let (a, b): (Vec<_>, Vec<_>) = self.samples.iter().zip(first).partition(|(_, f)| *f);
        let unzip = |v: Vec<(&Sample, bool)>| v.into_iter().map(|(s, _)| s.clone()).collect();
        Ok((Dataset::new(unzip(a), self.split), Dataset::new(unzip(b), self.split)))
    }
}

/// Stacks 48×48 images into an N×1×48×48 tensor.
pub fn image_batch<'a, T: Real>(images: impl IntoIterator<Item = &'a GrayImage>) -> Result<Tensor<T>> {
    let mut data = Vec::new();
    let mut n = 0;
    for img in images {
        if img.width() != IMAGE_SIDE || img.height() != IMAGE_SIDE {
            return Err(shape_err!(
                "expected {IMAGE_SIDE}x{IMAGE_SIDE}, got {}x{}",
                img.width(),
                img.height()
            ));
        }
        data.extend(img.pixels().iter().map(|&p| T::of(p as f64)));
        n += 1;
    }
    if n == 0 {
        return Err(shape_err!("cannot build an empty batch"));
    }
    Tensor::new(&[n, 1, IMAGE_SIDE, IMAGE_SIDE], data)
}

/// Inverse-frequency class weights `w_c = N / (K · n_c)`; uniform counts give
/// all ones.
pub fn class_weights(class_counts: &[usize; NUM_CLASSES]) -> Result<[f64; NUM_CLASSES]> {
    if let Some(c) = class_counts.iter().position(|&n| n == 0) {
        return Err(Error::EmptyClass(EmotionLabel::ALL[c].name()));
    }
    let total: usize = class_counts.iter().sum();
    Ok(core::array::from_fn(|c| {
        total as f64 / (NUM_CLASSES as f64 * class_counts[c] as f64)
    }))
}
