//! FER2013 CSV and class-directory loaders.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use fer_core::{Dataset, EmotionLabel, GrayImage, Sample, Split, IMAGE_PIXELS, IMAGE_SIDE};

use crate::error::{Error, Result};
use crate::imageio;

/// How malformed CSV rows are handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RowPolicy {
    #[default]
    Strict,
    Skip,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RowError {
    /// 1-based line number in the file; the header is line 1.
    pub row: usize,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct Fer2013 {
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
    pub skipped: Vec<RowError>,
}

impl Fer2013 {
    pub fn total(&self) -> usize {
        self.train.len() + self.val.len() + self.test.len()
    }

    pub fn class_counts(&self) -> [usize; 7] {
        let mut c = [0; 7];
        for d in [&self.train, &self.val, &self.test] {
            for (acc, n) in c.iter_mut().zip(d.class_counts()) {
                *acc += n;
            }
        }
        c
    }
}

fn parse_row(record: &csv::StringRecord) -> std::result::Result<(EmotionLabel, GrayImage, Split), String> {
    if record.len() != 3 {
        return Err(format!("expected 3 fields, found {}", record.len()));
    }
    let emotion: usize = record[0]
        .trim()
        .parse()
        .map_err(|_| format!("emotion {:?} is not an integer", &record[0]))?;
    let label = EmotionLabel::from_index(emotion).ok_or_else(|| format!("emotion {emotion} outside 0-6"))?;
    let mut pixels = Vec::with_capacity(IMAGE_PIXELS);
    for tok in record[1].split_ascii_whitespace() {
        let v: u8 = tok.parse().map_err(|_| format!("pixel {tok:?} is not an integer in 0-255"))?;
        pixels.push(v as f32 / 255.0);
    }
    if pixels.len() != IMAGE_PIXELS {
        return Err(format!("expected {IMAGE_PIXELS} pixels, found {}", pixels.len()));
    }
    let split = match record[2].trim() {
        "Training" => Split::Train,
        "PublicTest" => Split::Val,
        "PrivateTest" => Split::Test,
        other => return Err(format!("unknown Usage {other:?}")),
    };
    let image = GrayImage::new(IMAGE_SIDE, IMAGE_SIDE, pixels).expect("pixel count checked");
    Ok((label, image, split))
}

/// Parses FER2013 CSV from any reader. `origin` names the source in errors
/// and sample ids.
pub fn read_fer_csv(reader: impl Read, origin: &str, policy: RowPolicy) -> Result<Fer2013> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(reader);
    let header_err = |message: String| Error::Row {
        origin: origin.into(),
        row: 1,
        message,
    };
    let header = rdr.headers().map_err(|e| header_err(e.to_string()))?;
    let names: Vec<&str> = header.iter().map(str::trim).collect();
    if names != ["emotion", "pixels", "Usage"] {
        return Err(header_err(format!("header must be emotion,pixels,Usage, found {}", names.join(","))));
    }
    let mut parts: [Vec<Sample>; 3] = Default::default();
    let mut skipped = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 2;
        let parsed = record.map_err(|e| e.to_string()).and_then(|r| parse_row(&r));
        match parsed {
            Ok((label, image, split)) => {
                let sample = Sample::new(image, label, format!("{origin}:{row}"))?;
                parts[split as usize].push(sample);
            }
            Err(message) => match policy {
                RowPolicy::Strict => {
                    return Err(Error::Row {
                        origin: origin.into(),
                        row,
                        message,
                    })
                }
                RowPolicy::Skip => skipped.push(RowError { row, message }),
            },
        }
    }
    let [train, val, test] = parts;
    Ok(Fer2013 {
        train: Dataset::new(train, Split::Train),
        val: Dataset::new(val, Split::Val),
        test: Dataset::new(test, Split::Test),
        skipped,
    })
}

pub fn load_fer_csv(path: &Path, policy: RowPolicy) -> Result<Fer2013> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_fer_csv(std::io::BufReader::new(file), &path.display().to_string(), policy)
}

/// Result of scanning a class-directory tree.
#[derive(Debug, Clone)]
pub struct DirLoad {
    pub dataset: Dataset,
    /// Entries at the root that are not one of the seven class directories.
    pub ignored: Vec<PathBuf>,
    /// Files that could not be decoded, with the reason.
    pub skipped: Vec<(PathBuf, String)>,
}

const IMAGE_EXTENSIONS: [&str; 5] = ["png", "pgm", "jpg", "jpeg", "pnm"];

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(dir, err)))
        .collect::<Result<Vec<_>>>()?;
    out.sort();
    Ok(out)
}

/// Loads `<root>/<emotion>/*.{png,pgm,jpg}` in lexicographic path order.
/// Images are converted to grayscale and resized to 48×48 when needed;
/// `source_id` is the path relative to `root`.
pub fn load_class_directories(root: &Path, split: Split) -> Result<DirLoad> {
    let mut samples = Vec::new();
    let mut ignored = Vec::new();
    let mut skipped = Vec::new();
    for entry in sorted_entries(root)? {
        let name = entry.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        let label = match EmotionLabel::from_str(name) {
            Ok(l) if entry.is_dir() && name == l.name() => l,
            _ => {
                ignored.push(entry);
                continue;
            }
        };
        for file in sorted_entries(&entry)? {
            let ext = file.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
            if !file.is_file() || !ext.is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.as_str())) {
                continue;
            }
            let image = match imageio::read_gray(&file) {
                Ok(img) => img,
                Err(e) => {
                    skipped.push((file, e.to_string()));
                    continue;
                }
            };
            let image = if image.width() == IMAGE_SIDE && image.height() == IMAGE_SIDE {
                image
            } else {
                image.resize_bilinear(IMAGE_SIDE, IMAGE_SIDE)?
            };
            let rel = file.strip_prefix(root).unwrap_or(&file);
            let id = rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/");
            samples.push(Sample::new(image, label, id)?);
        }
    }
    Ok(DirLoad {
        dataset: Dataset::new(samples, split),
        ignored,
        skipped,
    })
}

/// Stratified subset of roughly `n` samples (per-class rounding).
pub fn stratified_subset(dataset: &Dataset, n: usize, seed: u64) -> Result<Dataset> {
    if n >= dataset.len() {
        return Ok(dataset.clone());
    }
    Ok(dataset.stratified_split(n as f64 / dataset.len() as f64, seed)?.0)
}
