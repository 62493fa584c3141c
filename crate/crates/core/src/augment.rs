//! Training-time augmentation and test-time-augmentation sets.
//!
//! A policy draws a horizontal flip, a rotation, a zoom and a shift from a
//! seeded stream. The flip is applied as an exact column reversal; rotation,
//! zoom and shift are composed into one affine map (rotate, then scale, both
//! about the image center, then translate) and resampled once with bilinear
//! interpolation.

use alloc::vec::Vec;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{arg_err, Result};
use crate::{rng, GrayImage, Sample};

/// How pixels that map outside the source image are filled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FillMode {
    /// Replicate the nearest border pixel.
    Edge,
    Constant(f32),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentPolicy {
    pub flip_prob: f64,
    /// Rotation drawn uniformly from ±`rotation_deg` degrees.
    pub rotation_deg: f64,
    /// Zoom factor drawn uniformly from `1 ± zoom_frac`.
    pub zoom_frac: f64,
    /// Per-axis shift drawn uniformly from ±`shift_frac` of the extent.
    pub shift_frac: f64,
    pub fill: FillMode,
}

impl Default for AugmentPolicy {
    fn default() -> Self {
        Self {
            flip_prob: 0.5,
            rotation_deg: 10.0,
            zoom_frac: 0.10,
            shift_frac: 0.10,
            fill: FillMode::Edge,
        }
    }
}

/// Concrete transform parameters drawn from a policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineDraw {
    pub flip: bool,
    pub angle_deg: f64,
    pub zoom: f64,
    pub shift_x: f64,
    pub shift_y: f64,
}

impl AugmentPolicy {
    /// Flip disabled and every magnitude zero.
    pub fn identity() -> Self {
        Self {
            flip_prob: 0.0,
            rotation_deg: 0.0,
            zoom_frac: 0.0,
            shift_frac: 0.0,
            fill: FillMode::Edge,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.flip_prob) {
            return Err(arg_err!("flip_prob must be in [0, 1], got {}", self.flip_prob));
        }
        for (name, v) in [
            ("rotation_deg", self.rotation_deg),
            ("zoom_frac", self.zoom_frac),
            ("shift_frac", self.shift_frac),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(arg_err!("{name} must be a finite value >= 0, got {v}"));
            }
        }
        if self.zoom_frac >= 1.0 {
            return Err(arg_err!("zoom_frac must be < 1, got {}", self.zoom_frac));
        }
        Ok(())
    }

    /// Draws transform parameters. Always consumes five uniforms so the
    /// stream position does not depend on which magnitudes are zero.
    pub fn draw(&self, seed: u64) -> AffineDraw {
        let mut r = rng::rng(seed);
        let u: [f64; 5] = core::array::from_fn(|_| r.random());
        let sym = |u: f64, mag: f64| (2.0 * u - 1.0) * mag;
        AffineDraw {
            flip: u[0] < self.flip_prob,
            angle_deg: sym(u[1], self.rotation_deg),
            zoom: 1.0 + sym(u[2], self.zoom_frac),
            shift_x: sym(u[3], self.shift_frac),
            shift_y: sym(u[4], self.shift_frac),
        }
    }
}

impl AffineDraw {
    fn is_identity(&self) -> bool {
        self.angle_deg == 0.0 && self.zoom == 1.0 && self.shift_x == 0.0 && self.shift_y == 0.0
    }

    /// Applies the drawn transform to an image.
    pub fn apply(&self, image: &GrayImage, fill: FillMode) -> GrayImage {
        let src = if self.flip {
            image.flip_horizontal()
        } else {
            image.clone()
        };
        if self.is_identity() {
            return src;
        }
        let (w, h) = (src.width(), src.height());
        let cx = (w as f64 - 1.0) / 2.0;
        let cy = (h as f64 - 1.0) / 2.0;
        let theta = self.angle_deg.to_radians();
        let (sin, cos) = (libm::sin(theta), libm::cos(theta));
        let tx = self.shift_x * w as f64;
        let ty = self.shift_y * h as f64;
        // output q = Z·R·(p − c) + c + t  ⇒  p = R⁻¹·(q − c − t)/Z + c
        let inv_zoom = 1.0 / self.zoom;
        let mut pixels = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                let dx = (x as f64 - cx - tx) * inv_zoom;
                let dy = (y as f64 - cy - ty) * inv_zoom;
                let sx = cos * dx + sin * dy + cx;
                let sy = -sin * dx + cos * dy + cy;
                let inside = sx >= -0.5 && sy >= -0.5 && sx <= w as f64 - 0.5 && sy <= h as f64 - 0.5;
                let v = match fill {
                    FillMode::Constant(c) if !inside => c,
                    _ => src.sample_bilinear(sx as f32, sy as f32),
                };
                pixels.push(v);
            }
        }
        GrayImage::new(w, h, pixels).expect("same dimensions as the source")
    }
}

/// Augments one image with parameters drawn from `seed`.
pub fn augment_image(image: &GrayImage, policy: &AugmentPolicy, seed: u64) -> GrayImage {
    policy.draw(seed).apply(image, policy.fill)
}

/// Augments a sample; the label and provenance are unchanged.
pub fn apply_policy(sample: &Sample, policy: &AugmentPolicy, seed: u64) -> Sample {
    let image = augment_image(sample.image(), policy, seed);
    Sample::new(image, sample.label(), sample.source_id()).expect("augmentation preserves size and range")
}

/// Number of images in a TTA set: original, flip, and seven sampled variants.
pub const TTA_SET_SIZE: usize = 9;

/// `[original, horizontal flip, 7 policy draws]`, deterministic in `seed`.
pub fn tta_set(image: &GrayImage, policy: &AugmentPolicy, seed: u64) -> Vec<GrayImage> {
    let mut set = Vec::with_capacity(TTA_SET_SIZE);
    set.push(image.clone());
    set.push(image.flip_horizontal());
    for i in 0..(TTA_SET_SIZE - 2) as u64 {
        set.push(augment_image(image, policy, rng::derive_seed(seed, &[i])));
    }
    set
}
