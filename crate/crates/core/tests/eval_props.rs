mod common;

use common::synthetic_dataset;
use fer_core::augment::{tta_set, AugmentPolicy, TTA_SET_SIZE};
use fer_core::data::{class_weights, image_batch};
use fer_core::eval::{
    accuracy, argmax, confusion_matrix, ensemble_predict, error_report, predict_dataset, predict_image, predict_tta,
    soft_vote, EnsembleMember,
};
use fer_core::model::ModelGraph;
use fer_core::{Arch, Classifier, Dataset, EmotionLabel, GrayImage, LayerSpec, Padding, Split};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn face(seed: u64) -> GrayImage {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    GrayImage::new(48, 48, (0..2304).map(|_| r.random_range(0.0..1.0)).collect()).unwrap()
}

#[test]
fn ensemble_of_identical_members_is_the_member() {
    let m = ModelGraph::<f32>::build(Arch::FiveLayer, 4).unwrap();
    let img = face(1);
    let policy = AugmentPolicy::default();
    for tta in [false, true] {
        let single = predict_image(&m, &img, tta.then_some((&policy, 9))).unwrap();
        for n in [1, 2, 3, 7] {
            let members: Vec<EnsembleMember> = (0..n).map(|_| EnsembleMember { model: &m, tta }).collect();
            assert_eq!(ensemble_predict(&members, &img, &policy, 9).unwrap(), single);
        }
    }
}

#[test]
fn ensemble_member_order_is_irrelevant() {
    let a = ModelGraph::<f32>::build(Arch::FiveLayer, 1).unwrap();
    let b = ModelGraph::<f32>::build(Arch::FiveLayer, 2).unwrap();
    let c = ModelGraph::<f32>::build(Arch::FiveLayer, 3).unwrap();
    let img = face(2);
    let p = AugmentPolicy::default();
    let fwd = [&a as &dyn Classifier, &b, &c].map(|model| EnsembleMember { model, tta: false });
    let rev = [&c as &dyn Classifier, &a, &b].map(|model| EnsembleMember { model, tta: false });
    let out = ensemble_predict(&fwd, &img, &p, 0).unwrap();
    assert_eq!(out, ensemble_predict(&rev, &img, &p, 0).unwrap());
    assert!((out.iter().sum::<f32>() - 1.0).abs() < 1e-5);
}

#[test]
fn zero_magnitude_tta_is_deterministic_and_structured() {
    let m = ModelGraph::<f32>::build(Arch::FiveLayer, 5).unwrap();
    let img = face(3);
    let policy = AugmentPolicy::identity();
    let a = predict_tta(&m, &img, &policy, 77).unwrap();
    let b = predict_tta(&m, &img, &policy, 77).unwrap();
    assert_eq!(a, b);
    let set = tta_set(&img, &policy, 77);
    assert_eq!(set.len(), TTA_SET_SIZE);
    assert!(set[2..].iter().all(|s| *s == img));
    let orig = predict_image(&m, &img, None).unwrap();
    let flip = predict_image(&m, &img.flip_horizontal(), None).unwrap();
    let mut rows = vec![orig.clone(), flip];
    rows.extend(std::iter::repeat_n(orig, 7));
    assert_eq!(a, soft_vote(&rows).unwrap());
}

#[test]
fn flip_symmetric_model_agrees_on_mirror_pair() {
    // odd, mirror-symmetric kernels with centred padding, then a global max
    let specs = [
        LayerSpec::Conv { filters: 6, kernel: 5, stride: 1, padding: Padding::Same },
        LayerSpec::Relu,
        LayerSpec::MaxPool { kernel: 48, stride: 48, ceil_mode: false },
        LayerSpec::Flatten,
        LayerSpec::Dense { units: 7 },
        LayerSpec::SoftmaxHead,
    ];
    let mut m = ModelGraph::<f32>::from_specs(Arch::Custom, &specs, [1, 48, 48], 6).unwrap();
    for (name, t) in m.named_tensors_mut() {
        if name == "conv1.weight" {
            let d = t.data_mut();
            for f in 0..6 {
                for y in 0..5 {
                    for x in 0..2 {
                        d[f * 25 + y * 5 + 4 - x] = d[f * 25 + y * 5 + x];
                    }
                }
            }
        }
    }
    for seed in 0..5 {
        let img = face(seed);
        let set = tta_set(&img, &AugmentPolicy::default(), seed);
        let p = m.forward_probs(&image_batch::<f32>(&set[..2]).unwrap()).unwrap();
        for (a, b) in p.row(0).iter().zip(p.row(1)) {
            assert!((a - b).abs() <= 1e-6, "{a} vs {b}");
        }
    }
}

#[test]
fn two_class_soft_vote_arithmetic() {
    let v = soft_vote(&[[0.6f32, 0.4], [0.2, 0.8]]).unwrap();
    assert!((v[0] - 0.4).abs() < 1e-7 && (v[1] - 0.6).abs() < 1e-7);
    assert_eq!(argmax(&v), 1);
    assert!(soft_vote::<[f32; 2]>(&[]).is_err());
    assert!(soft_vote(&[[0.6f32, 0.6]]).is_err());
}

fn one_hot(c: usize, conf: f32) -> Vec<f32> {
    let rest = (1.0 - conf) / 6.0;
    (0..7).map(|i| if i == c { conf } else { rest }).collect()
}

#[test]
fn confusion_and_accuracy_agree_with_direct_count() {
    let ds = synthetic_dataset(&[3, 1, 4, 6, 2, 2, 5], 1, Split::Test);
    let mut r = ChaCha8Rng::seed_from_u64(2);
    let probs: Vec<Vec<f32>> = ds
        .samples()
        .iter()
        .map(|s| if r.random_bool(0.6) { one_hot(s.label().index(), 0.7) } else { one_hot(r.random_range(0..7), 0.5) })
        .collect();
    let cm = confusion_matrix(&probs, &ds).unwrap();
    assert_eq!(cm.total(), ds.len() as u64);
    assert_eq!(cm.row_sums().map(|v| v as usize), ds.class_counts());
    let direct = probs.iter().zip(ds.samples()).filter(|(p, s)| argmax(p) == s.label().index()).count();
    assert_eq!(accuracy(&probs, &ds).unwrap(), direct as f64 / ds.len() as f64);
    for c in 0..7 {
        let rate = cm.misclassification_rate(c).unwrap();
        assert!((rate - (1.0 - cm.recall(c).unwrap())).abs() < 1e-15);
    }
    let perfect: Vec<Vec<f32>> = ds.samples().iter().map(|s| one_hot(s.label().index(), 0.9)).collect();
    let cm = confusion_matrix(&perfect, &ds).unwrap();
    assert_eq!(cm.trace(), cm.total());
    assert_eq!(accuracy(&perfect, &ds).unwrap(), 1.0);
    assert!(error_report(&perfect, &ds, 5).unwrap().is_empty());
    assert!(accuracy(&[], &Dataset::empty(Split::Test)).is_err());
}

#[test]
fn error_report_rows_are_consistent() {
    let ds = synthetic_dataset(&[4; 7], 3, Split::Test);
    let m = ModelGraph::<f32>::build(Arch::FiveLayer, 7).unwrap();
    let probs = predict_dataset(&m, &ds, 16).unwrap();
    let report = error_report(&probs, &ds, 2).unwrap();
    assert!(!report.is_empty());
    let mut per_cell = std::collections::HashMap::new();
    for row in &report {
        let i = ds.samples().iter().position(|s| s.source_id() == row.source_id).unwrap();
        assert_eq!(EmotionLabel::ALL[argmax(&probs[i])], row.predicted);
        assert_ne!(row.predicted, row.true_label);
        assert_eq!(row.top3[0].0, row.predicted);
        assert!(row.top3.iter().map(|t| t.1).sum::<f32>() <= 1.0 + 1e-6);
        *per_cell.entry((row.true_label, row.predicted)).or_insert(0) += 1;
    }
    assert!(per_cell.values().all(|&n| n <= 2));
}

#[test]
fn fer2013_weight_ratio() {
    let counts = [4953, 547, 5121, 8989, 6077, 4002, 6198];
    let w = class_weights(&counts).unwrap();
    let want = 8989.0 / 547.0;
    let got = w[EmotionLabel::Disgust.index()] / w[EmotionLabel::Happy.index()];
    assert!(((got - want) / want).abs() < 1e-9);
    assert_eq!(class_weights(&[5; 7]).unwrap(), [1.0; 7]);
    assert!(class_weights(&[1, 1, 1, 1, 1, 1, 0]).is_err());
}

#[test]
fn stratified_split_counts_and_determinism() {
    let ds = synthetic_dataset(&[10; 7], 4, Split::Train);
    let (a, b) = ds.stratified_split(0.8, 1).unwrap();
    assert_eq!(a.class_counts(), [8; 7]);
    assert_eq!(b.class_counts(), [2; 7]);
    let (a2, _) = ds.stratified_split(0.8, 1).unwrap();
    assert_eq!(a.samples(), a2.samples());
    let (a3, _) = ds.stratified_split(0.8, 2).unwrap();
    assert_ne!(a.samples(), a3.samples());
    let merged = Dataset::merge(&[&ds, &Dataset::empty(Split::Train)]);
    assert_eq!(merged.samples(), ds.samples());
}
