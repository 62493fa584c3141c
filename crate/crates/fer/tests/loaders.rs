mod common;

use common::{fer_csv, write_gray_png};
use fer::dataset::{load_class_directories, load_fer_csv, read_fer_csv, RowPolicy};
use fer::Error;
use fer_core::{Dataset, EmotionLabel, Split};

#[test]
fn white_image_in_happy_directory() {
    let dir = tempfile::tempdir().unwrap();
    write_gray_png(&dir.path().join("happy/a.png"), 48, 48, |_, _| 255);
    let load = load_class_directories(dir.path(), Split::Train).unwrap();
    let d = load.dataset;
    assert_eq!(d.len(), 1);
    assert_eq!(d.samples()[0].label(), EmotionLabel::Happy);
    assert_eq!(d.samples()[0].source_id(), "happy/a.png");
    assert!(d.samples()[0].pixels().iter().all(|&p| p == 1.0));
}

#[test]
fn empty_class_directories() {
    let dir = tempfile::tempdir().unwrap();
    for l in EmotionLabel::ALL {
        std::fs::create_dir(dir.path().join(l.name())).unwrap();
    }
    let d = load_class_directories(dir.path(), Split::Train).unwrap().dataset;
    assert!(d.is_empty());
    assert_eq!(d.class_counts(), [0; 7]);
}

#[test]
fn large_constant_image_resizes_to_same_constant() {
    let dir = tempfile::tempdir().unwrap();
    write_gray_png(&dir.path().join("sad/big.png"), 96, 96, |_, _| 51);
    let d = load_class_directories(dir.path(), Split::Train).unwrap().dataset;
    let s = &d.samples()[0];
    assert_eq!((s.image().width(), s.image().height()), (48, 48));
    assert!(s.pixels().iter().all(|&p| (p - 0.2).abs() < 1e-6));
}

#[test]
fn colour_images_use_bt601() {
    let dir = tempfile::tempdir().unwrap();
    let img = image::RgbImage::from_pixel(48, 48, image::Rgb([0, 255, 0]));
    std::fs::create_dir_all(dir.path().join("fear")).unwrap();
    img.save(dir.path().join("fear/green.png")).unwrap();
    let d = load_class_directories(dir.path(), Split::Train).unwrap().dataset;
    assert!(d.samples()[0].pixels().iter().all(|&p| (p - 0.587).abs() <= 1.0 / 255.0));
}

#[test]
fn unknown_directories_and_bad_files_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    write_gray_png(&dir.path().join("joyful/a.png"), 48, 48, |_, _| 0);
    write_gray_png(&dir.path().join("angry/b.png"), 48, 48, |_, _| 0);
    std::fs::write(dir.path().join("angry/a.png"), b"junk").unwrap();
    std::fs::write(dir.path().join("angry/notes.txt"), b"hello").unwrap();
    let load = load_class_directories(dir.path(), Split::Train).unwrap();
    assert_eq!(load.dataset.len(), 1);
    assert_eq!(load.ignored.len(), 1);
    assert_eq!(load.skipped.len(), 1);
    assert!(load.skipped[0].0.ends_with("angry/a.png"));
}

#[test]
fn directory_order_is_lexicographic() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["neutral/b.png", "angry/z.png", "neutral/a.png", "angry/c.png"] {
        write_gray_png(&dir.path().join(name), 48, 48, |_, _| 9);
    }
    let d = load_class_directories(dir.path(), Split::Train).unwrap().dataset;
    let ids: Vec<&str> = d.samples().iter().map(|s| s.source_id()).collect();
    assert_eq!(ids, ["angry/c.png", "angry/z.png", "neutral/a.png", "neutral/b.png"]);
    assert_eq!(d.class_counts().iter().sum::<usize>(), d.len());
}

#[test]
fn csv_splits_and_merge_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fer.csv");
    std::fs::write(
        &path,
        fer_csv(&[(0, "Training", 0), (6, "PublicTest", 1), (1, "PrivateTest", 2), (3, "Training", 3)]),
    )
    .unwrap();
    let d = load_fer_csv(&path, RowPolicy::Strict).unwrap();
    assert_eq!((d.train.len(), d.val.len(), d.test.len()), (2, 1, 1));
    assert_eq!(d.test.samples()[0].label(), EmotionLabel::Disgust);
    assert_eq!(d.train.samples()[1].pixels()[0], 3.0 / 255.0);
    assert!(d.train.samples().iter().all(|s| s.pixels().iter().all(|p| (0.0..=1.0).contains(p))));

    write_gray_png(&dir.path().join("imgs/surprise/x.png"), 48, 48, |_, _| 1);
    let extra = load_class_directories(&dir.path().join("imgs"), Split::Train).unwrap().dataset;
    let merged = Dataset::merge(&[&d.train, &extra]);
    let ids: Vec<&str> = merged.samples().iter().map(|s| s.source_id()).collect();
    assert_eq!(merged.len(), 3);
    assert!(ids.contains(&"surprise/x.png"));
    for (i, c) in merged.class_counts().iter().enumerate() {
        assert_eq!(*c, d.train.class_counts()[i] + extra.class_counts()[i]);
    }
}

#[test]
fn malformed_csv_rows() {
    let mut text = fer_csv(&[(2, "Training", 0)]);
    text.push_str("4,1 2 3,Training\n");
    let err = read_fer_csv(text.as_bytes(), "fer.csv", RowPolicy::Strict).unwrap_err();
    assert!(matches!(err, Error::Row { row: 3, .. }));
    assert!(err.to_string().contains("row 3"));
    let d = read_fer_csv(text.as_bytes(), "fer.csv", RowPolicy::Skip).unwrap();
    assert_eq!(d.train.len(), 1);
    assert_eq!(d.skipped[0].row, 3);
}
