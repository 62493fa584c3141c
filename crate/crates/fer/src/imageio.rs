//! Decoding to and encoding from [`GrayImage`].

use std::io::Cursor;
use std::path::Path;

use fer_core::image::luma_bt601;
use fer_core::GrayImage;
use image::{ColorType, DynamicImage, ImageFormat};

use crate::error::{Error, Result};

/// Grayscale in [0, 1]; colour sources go through BT.601 luma.
pub fn to_gray(img: &DynamicImage) -> GrayImage {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let pixels: Vec<f32> = match img.color() {
        ColorType::L8 | ColorType::La8 => img.to_luma8().into_raw().into_iter().map(|v| v as f32 / 255.0).collect(),
        ColorType::L16 | ColorType::La16 => {
            img.to_luma16().into_raw().into_iter().map(|v| v as f32 / 65535.0).collect()
        }
        _ => img
            .to_rgb32f()
            .into_raw()
            .chunks_exact(3)
            .map(|p| luma_bt601(p[0], p[1], p[2]).clamp(0.0, 1.0))
            .collect(),
    };
    GrayImage::new(w, h, pixels).expect("decoded image has non-zero size")
}

pub fn decode_gray(bytes: &[u8]) -> std::result::Result<GrayImage, String> {
    let img = image::load_from_memory(bytes).map_err(|e| e.to_string())?;
    Ok(to_gray(&img))
}

pub fn decode_png_gray(bytes: &[u8]) -> std::result::Result<GrayImage, String> {
    let img = image::load_from_memory_with_format(bytes, ImageFormat::Png).map_err(|e| e.to_string())?;
    Ok(to_gray(&img))
}

pub fn read_gray(path: &Path) -> Result<GrayImage> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_gray(&bytes).map_err(|message| Error::Image {
        path: path.into(),
        message,
    })
}

/// 8-bit grayscale quantization, round-to-nearest.
pub fn quantize(image: &GrayImage) -> Vec<u8> {
    image.pixels().iter().map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8).collect()
}

pub fn encode_gray_png(image: &GrayImage) -> Vec<u8> {
    let buf = image::GrayImage::from_raw(image.width() as u32, image.height() as u32, quantize(image))
        .expect("buffer matches dimensions");
    let mut out = Cursor::new(Vec::new());
    buf.write_to(&mut out, ImageFormat::Png).expect("in-memory PNG encoding");
    out.into_inner()
}

pub fn write_rgb_png(path: &Path, width: usize, height: usize, rgb: Vec<u8>) -> Result<()> {
    let buf = image::RgbImage::from_raw(width as u32, height as u32, rgb)
        .ok_or_else(|| Error::Format("RGB buffer does not match image size".into()))?;
    buf.save_with_format(path, ImageFormat::Png).map_err(|e| Error::Image {
        path: path.into(),
        message: e.to_string(),
    })
}
