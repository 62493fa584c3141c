#![allow(dead_code)]

use std::path::Path;

use fer_core::model::ModelGraph;
use fer_core::Arch;

pub fn gray_png(w: u32, h: u32, f: impl Fn(u32, u32) -> u8) -> Vec<u8> {
    let img = image::GrayImage::from_fn(w, h, |x, y| image::Luma([f(x, y)]));
    let mut out = std::io::Cursor::new(Vec::new());
    img.write_to(&mut out, image::ImageFormat::Png).unwrap();
    out.into_inner()
}

pub fn write_gray_png(path: &Path, w: u32, h: u32, f: impl Fn(u32, u32) -> u8) {
    std::fs::create_dir_all(path.parent().unwrap()).unwrap();
    std::fs::write(path, gray_png(w, h, f)).unwrap();
}

pub fn five_layer_weights(path: &Path, seed: u64) -> ModelGraph<f32> {
    let m = ModelGraph::<f32>::build(Arch::FiveLayer, seed).unwrap();
    fer::weights::save(path, &m, Default::default()).unwrap();
    m
}

/// FER2013-format CSV text; `rows` are (emotion, usage, pixel fn of index).
pub fn fer_csv(rows: &[(u8, &str, u8)]) -> String {
    let mut s = String::from("emotion,pixels,Usage\n");
    for &(e, usage, v) in rows {
        let px: Vec<String> = (0..2304).map(|i| ((v as usize + i) % 256).to_string()).collect();
        s.push_str(&format!("{e},{},{usage}\n", px.join(" ")));
    }
    s
}
