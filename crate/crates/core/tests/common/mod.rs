#![allow(dead_code)]

use fer_core::model::ModelGraph;
use fer_core::{Arch, Dataset, EmotionLabel, GrayImage, LayerSpec, Padding, Sample, Split};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Noise image with a bright horizontal band whose row depends on the class.
pub fn synthetic_dataset(per_class: &[usize; 7], seed: u64, split: Split) -> Dataset {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::new();
    for (c, &n) in per_class.iter().enumerate() {
        for i in 0..n {
            let band = 4 + 6 * c;
            let px: Vec<f32> = (0..48 * 48)
                .map(|p| {
                    let y = p / 48;
                    let noise = r.random_range(0.0..0.3f32);
                    if y >= band && y < band + 4 { 0.7 + noise } else { noise }
                })
                .collect();
            let img = GrayImage::new(48, 48, px).unwrap();
            samples.push(Sample::new(img, EmotionLabel::ALL[c], format!("syn/{c}/{i}")).unwrap());
        }
    }
    Dataset::new(samples, split)
}

/// Cheap stack over a 48×48 input: strided conv, batchnorm, pool, dropout.
pub fn tiny_model(seed: u64) -> ModelGraph<f32> {
    let specs = [
        LayerSpec::Conv { filters: 4, kernel: 4, stride: 4, padding: Padding::Valid },
        LayerSpec::BatchNorm,
        LayerSpec::Relu,
        LayerSpec::MaxPool { kernel: 2, stride: 2, ceil_mode: false },
        LayerSpec::Flatten,
        LayerSpec::Dropout { rate: 0.2 },
        LayerSpec::Dense { units: 7 },
        LayerSpec::SoftmaxHead,
    ];
    ModelGraph::from_specs(Arch::Custom, &specs, [1, 48, 48], seed).unwrap()
}
