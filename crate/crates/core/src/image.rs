//! Grayscale image buffer and the pixel-level conversions shared by the
//! loaders, augmentation and rendering.

use alloc::vec::Vec;

use crate::error::{shape_err, Result};

/// Row-major single-channel float image.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<f32>,
}

/// ITU-R BT.601 luma of an RGB triple.
#[inline]
pub fn luma_bt601(r: f32, g: f32, b: f32) -> f32 {
    0.299 * r + 0.587 * g + 0.114 * b
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 || pixels.len() != width * height {
            return Err(shape_err!(
                "image {width}x{height} needs {} pixels, got {}",
                width * height,
                pixels.len()
            ));
        }
        Ok(Self { width, height, pixels })
    }

    pub fn filled(width: usize, height: usize, value: f32) -> Self {
        Self::new(width, height, alloc::vec![value; width * height]).expect("non-empty image")
    }

    /// Interleaved RGB values (any scale) to luma via BT.601.
    pub fn from_rgb(width: usize, height: usize, rgb: &[f32]) -> Result<Self> {
        if rgb.len() != width * height * 3 {
            return Err(shape_err!("expected {} RGB values, got {}", width * height * 3, rgb.len()));
        }
        let px = rgb.chunks_exact(3).map(|p| luma_bt601(p[0], p[1], p[2])).collect();
        Self::new(width, height, px)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f32] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [f32] {
        &mut self.pixels
    }

    pub fn into_pixels(self) -> Vec<f32> {
        self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.pixels[y * self.width + x]
    }

    /// Mirror across the vertical axis (column reversal).
    pub fn flip_horizontal(&self) -> Self {
        let pixels = self
            .pixels
            .chunks_exact(self.width)
            .flat_map(|row| row.iter().rev().copied())
            .collect();
        Self {
            width: self.width,
            height: self.height,
            pixels,
        }
    }

    /// Bilinear value at continuous coordinates (pixel centers on integers),
    /// clamping coordinates to the border (edge replication). The result is
    /// clamped to the range of the four contributing pixels.
    pub fn sample_bilinear(&self, x: f32, y: f32) -> f32 {
        let max_x = (self.width - 1) as f32;
        let max_y = (self.height - 1) as f32;
        let x = x.clamp(0.0, max_x);
        let y = y.clamp(0.0, max_y);
        let x0 = libm::floorf(x) as usize;
        let y0 = libm::floorf(y) as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = x - x0 as f32;
        let fy = y - y0 as f32;
        let (a, b) = (self.get(x0, y0), self.get(x1, y0));
        let (c, d) = (self.get(x0, y1), self.get(x1, y1));
        let top = a * (1.0 - fx) + b * fx;
        let bottom = c * (1.0 - fx) + d * fx;
        let v = top * (1.0 - fy) + bottom * fy;
        let lo = a.min(b).min(c).min(d);
        let hi = a.max(b).max(c).max(d);
        v.clamp(lo, hi)
    }

    /// Bilinear resize with half-pixel alignment.
    pub fn resize_bilinear(&self, width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(shape_err!("cannot resize to {width}x{height}"));
        }
        if width == self.width && height == self.height {
            return Ok(self.clone());
        }
        let sx = self.width as f32 / width as f32;
        let sy = self.height as f32 / height as f32;
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            let src_y = (y as f32 + 0.5) * sy - 0.5;
            for x in 0..width {
                let src_x = (x as f32 + 0.5) * sx - 0.5;
                pixels.push(self.sample_bilinear(src_x, src_y));
            }
        }
        Self::new(width, height, pixels)
    }
}
