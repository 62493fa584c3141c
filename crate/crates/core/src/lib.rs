//! Facial-expression-recognition CNN toolkit core.
//!
//! Everything here is sans-IO and `no_std` (with `alloc`): a small dense
//! tensor engine with forward/backward passes for the layers the five-layer
//! and baseline networks need, model assembly, augmentation, SGD training,
//! soft-voting evaluation and interpretability maps. Dataset decoding, the
//! weights container, the CLI and the HTTP service live in the `fer` crate.
//!
//! All numeric code is generic over [`Real`] so the same layers run in `f32`
//! for training/serving and in `f64` for gradient checking.

#![no_std]

extern crate alloc;
#[cfg(any(test, feature = "std"))]
extern crate std;

pub mod augment;
pub mod data;
mod error;
pub mod eval;
pub mod image;
pub mod interpret;
mod linalg;
pub mod model;
pub mod ops;
mod real;
pub mod rng;
mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use real::Real;
pub use tensor::Tensor;

pub use augment::AugmentPolicy;
pub use data::{Dataset, EmotionLabel, Sample, Split, NUM_CLASSES};
pub use eval::ConfusionMatrix;
pub use image::GrayImage;
pub use interpret::Heatmap;
pub use model::{Arch, Classifier, LayerSpec, ModelGraph};
pub use ops::{LayerGrad, Mode, Padding};
pub use train::{TrainConfig, TrainState};

/// Side length of the square grayscale model input.
pub const IMAGE_SIDE: usize = 48;
/// Number of pixels in one model input.
pub const IMAGE_PIXELS: usize = IMAGE_SIDE * IMAGE_SIDE;
