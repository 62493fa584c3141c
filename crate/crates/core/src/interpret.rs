//! Occlusion-sensitivity and vanilla-gradient saliency maps, plus the color
//! ramp used to render them over the input image.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::data::image_batch;
use crate::error::{arg_err, Result};
use crate::eval::argmax;
use crate::model::Classifier;
use crate::{EmotionLabel, GrayImage, Real, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Occlusion,
    Saliency,
}

/// Per-pixel importance aligned with the input image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f32>,
    pub target_class: EmotionLabel,
    pub method: Method,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OcclusionParams {
    pub patch: usize,
    pub stride: usize,
    pub fill: f32,
}

impl Default for OcclusionParams {
    fn default() -> Self {
        Self {
            patch: 8,
            stride: 4,
            fill: 0.5,
        }
    }
}

/// Top-left offsets along one axis: step by `stride` until a patch reaches
/// the far border; the last patch may be clipped.
pub fn patch_offsets(extent: usize, patch: usize, stride: usize) -> Vec<usize> {
    (0..extent)
        .step_by(stride)
        .take_while(|&o| o == 0 || o + patch < extent + stride)
        .collect()
}

fn label_of(class: usize) -> Result<EmotionLabel> {
    EmotionLabel::from_index(class).ok_or_else(|| arg_err!("class {class} is not an emotion index"))
}

const OCCLUSION_BATCH: usize = 64;

/// Slides a `fill` patch over the image and records, at every covered pixel,
/// the drop in the target-class probability; overlapping patches are
/// averaged. The target defaults to the model's own prediction.
pub fn occlusion_map<C: Classifier<f32> + ?Sized>(
    model: &C,
    image: &GrayImage,
    params: OcclusionParams,
    target: Option<usize>,
) -> Result<Heatmap> {
    let (w, h) = (image.width(), image.height());
    if params.patch == 0 || params.stride == 0 {
        return Err(arg_err!("occlusion patch and stride must be positive"));
    }
    if params.patch > w.min(h) {
        return Err(arg_err!("occlusion patch {} exceeds the image", params.patch));
    }
    let base = model.predict_probs(&image_batch::<f32>([image])?)?;
    let target = target.unwrap_or_else(|| argmax(base.data()));
    let target_label = label_of(target)?;
    if target >= base.len() {
        return Err(arg_err!("target class {target} out of range"));
    }
    let p0 = base.data()[target];

    let positions: Vec<(usize, usize)> = patch_offsets(h, params.patch, params.stride)
        .into_iter()
        .flat_map(|y| patch_offsets(w, params.patch, params.stride).into_iter().map(move |x| (x, y)))
        .collect();
    let mut sum = vec![0.0f64; w * h];
    let mut cover = vec![0u32; w * h];
    for chunk in positions.chunks(OCCLUSION_BATCH) {
        let occluded: Vec<GrayImage> = chunk
            .iter()
            .map(|&(x0, y0)| {
                let mut img = image.clone();
                for y in y0..(y0 + params.patch).min(h) {
                    img.pixels_mut()[y * w + x0..y * w + (x0 + params.patch).min(w)].fill(params.fill);
                }
                img
            })
            .collect();
        let probs = model.predict_probs(&image_batch::<f32>(&occluded)?)?;
        let k = probs.dims2()?[1];
        for (&(x0, y0), row) in chunk.iter().zip(probs.data().chunks_exact(k)) {
            let delta = (p0 - row[target]) as f64;
            for y in y0..(y0 + params.patch).min(h) {
                for x in x0..(x0 + params.patch).min(w) {
                    sum[y * w + x] += delta;
                    cover[y * w + x] += 1;
                }
            }
        }
    }
    let values = sum
        .iter()
        .zip(&cover)
        .map(|(&s, &c)| if c == 0 { 0.0 } else { (s / c as f64) as f32 })
        .collect();
    Ok(Heatmap {
        width: w,
        height: h,
        values,
        target_class: target_label,
        method: Method::Occlusion,
    })
}

/// `|∂ logit_target / ∂ pixel|` in infer mode.
pub fn saliency_map<T: Real, C: Classifier<T> + ?Sized>(
    model: &C,
    image: &GrayImage,
    target: usize,
) -> Result<Heatmap> {
    let target_label = label_of(target)?;
    let x: Tensor<T> = image_batch([image])?;
    let grad = model.logit_input_gradient(&x, target)?;
    Ok(Heatmap {
        width: image.width(),
        height: image.height(),
        values: grad.data().iter().map(|g| g.abs().to_f64_lossy() as f32).collect(),
        target_class: target_label,
        method: Method::Saliency,
    })
}

/// Neutral color used where the heatmap carries no contrast.
pub const MID_COLOR: [u8; 3] = [128, 128, 128];

/// Cold-to-warm ramp: blue at 0, mid gray at 0.5, red at 1.
pub fn ramp(t: f64) -> [u8; 3] {
    let t = t.clamp(0.0, 1.0);
    let lerp = |a: f64, b: f64, u: f64| libm::round(a + (b - a) * u) as u8;
    if t <= 0.5 {
        let u = t * 2.0;
        [lerp(0.0, 128.0, u), lerp(0.0, 128.0, u), lerp(255.0, 128.0, u)]
    } else {
        let u = (t - 0.5) * 2.0;
        [lerp(128.0, 255.0, u), lerp(128.0, 0.0, u), lerp(128.0, 0.0, u)]
    }
}

/// Ramp colors for every heatmap value, normalized to the map's [min, max].
/// A constant map (including all zeros) renders as [`MID_COLOR`].
pub fn heatmap_colors(heatmap: &Heatmap) -> Vec<[u8; 3]> {
    let (lo, hi) = heatmap
        .values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v as f64), hi.max(v as f64)));
    heatmap
        .values
        .iter()
        .map(|&v| {
            if hi > lo {
                ramp((v as f64 - lo) / (hi - lo))
            } else {
                MID_COLOR
            }
        })
        .collect()
}

/// Blends the ramp colors over the grayscale image; returns packed RGB8.
pub fn render_overlay(heatmap: &Heatmap, image: &GrayImage, alpha: f32) -> Result<Vec<u8>> {
    if image.width() != heatmap.width || image.height() != heatmap.height {
        return Err(arg_err!("heatmap and image sizes differ"));
    }
    let colors = heatmap_colors(heatmap);
    let mut out = Vec::with_capacity(colors.len() * 3);
    for (c, &g) in colors.iter().zip(image.pixels()) {
        let base = g.clamp(0.0, 1.0) * 255.0;
        for &ch in c {
            out.push(libm::roundf((1.0 - alpha) * base + alpha * ch as f32) as u8);
        }
    }
    Ok(out)
}
