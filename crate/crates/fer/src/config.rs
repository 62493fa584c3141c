//! Flat `key = value` training configuration.
//!
//! Blank lines and `#` comments are ignored. Keys mirror [`TrainConfig`]
//! fields; the augmentation policy is spelled out as `flip_prob`,
//! `rotation_deg`, `zoom_frac`, `shift_frac` and `fill` (`edge` or
//! `constant:<value>`). Dataset and output locations live alongside.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use fer_core::augment::FillMode;
use fer_core::{Arch, TrainConfig};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub arch: Arch,
    pub train: TrainConfig,
    pub bn_momentum: f64,
    pub bn_epsilon: f64,
    /// FER2013 CSV or class-directory root.
    pub dataset: Option<PathBuf>,
    /// Extra class-directory trees merged into the training split.
    pub aux_dirs: Vec<PathBuf>,
    /// Fraction of a directory dataset used for training; the rest validates.
    pub train_fraction: f64,
    /// Stratified caps on the training and validation sets.
    pub train_limit: Option<usize>,
    pub val_limit: Option<usize>,
    pub weights_out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            arch: Arch::FiveLayer,
            train: TrainConfig::default(),
            bn_momentum: 0.9,
            bn_epsilon: 1e-5,
            dataset: None,
            aux_dirs: Vec::new(),
            train_fraction: 0.8,
            train_limit: None,
            val_limit: None,
            weights_out: PathBuf::from("model.ferw"),
        }
    }
}

fn parse<T: FromStr>(value: &str) -> std::result::Result<T, String> {
    value.parse().map_err(|_| format!("cannot parse {value:?}"))
}

fn parse_bool(value: &str) -> std::result::Result<bool, String> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(format!("expected a boolean, got {value:?}")),
    }
}

fn parse_fill(value: &str) -> std::result::Result<FillMode, String> {
    if value.eq_ignore_ascii_case("edge") {
        return Ok(FillMode::Edge);
    }
    match value.split_once(':') {
        Some((k, v)) if k.eq_ignore_ascii_case("constant") => Ok(FillMode::Constant(parse(v.trim())?)),
        _ => Err(format!("fill must be `edge` or `constant:<value>`, got {value:?}")),
    }
}

impl RunConfig {
    fn set(&mut self, key: &str, value: &str, base: &Path) -> std::result::Result<(), String> {
        let t = &mut self.train;
        let path = |v: &str| base.join(v);
        match key {
            "arch" => self.arch = parse(value)?,
            "lr0" => t.lr0 = parse(value)?,
            "batch_size" => t.batch_size = parse(value)?,
            "momentum" => t.momentum = parse(value)?,
            "weight_decay" => t.weight_decay = parse(value)?,
            "max_epochs" => t.max_epochs = parse(value)?,
            "plateau_patience" => t.plateau_patience = parse(value)?,
            "lr_factor" => t.lr_factor = parse(value)?,
            "use_class_weights" => t.use_class_weights = parse_bool(value)?,
            "augment" => t.augment = parse_bool(value)?,
            "flip_prob" => t.augment_policy.flip_prob = parse(value)?,
            "rotation_deg" => t.augment_policy.rotation_deg = parse(value)?,
            "zoom_frac" => t.augment_policy.zoom_frac = parse(value)?,
            "shift_frac" => t.augment_policy.shift_frac = parse(value)?,
            "fill" => t.augment_policy.fill = parse_fill(value)?,
            "seed" => t.seed = parse(value)?,
            "bn_momentum" => self.bn_momentum = parse(value)?,
            "bn_epsilon" => self.bn_epsilon = parse(value)?,
            "dataset" => self.dataset = Some(path(value)),
            "aux_dirs" => {
                self.aux_dirs = value.split(',').map(str::trim).filter(|s| !s.is_empty()).map(path).collect()
            }
            "train_fraction" => self.train_fraction = parse(value)?,
            "train_limit" => self.train_limit = Some(parse(value)?),
            "val_limit" => self.val_limit = Some(parse(value)?),
            "weights_out" => self.weights_out = path(value),
            _ => return Err(format!("unknown key {key:?}")),
        }
        Ok(())
    }

    /// Parses config text; relative paths resolve against `base`.
    pub fn parse(text: &str, origin: &Path, base: &Path) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let err = |line: usize, message: String| Error::Config {
            path: origin.into(),
            line,
            message,
        };
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| err(i + 1, "expected `key = value`".into()))?;
            cfg.set(k.trim(), v.trim(), base).map_err(|m| err(i + 1, m))?;
        }
        cfg.train.validate().map_err(|e| err(0, e.to_string()))?;
        if !(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0) {
            return Err(err(0, "train_fraction must be in (0, 1)".into()));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path, path.parent().unwrap_or(Path::new(".")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_keys() {
        let text = "# desk run\nlr0 = 0.01\nmax_epochs=30\nuse_class_weights = yes\nfill = constant:0.5\narch = baseline\ndataset = data/fer.csv\n";
        let c = RunConfig::parse(text, Path::new("x.cfg"), Path::new("/r")).unwrap();
        assert_eq!(c.train.lr0, 0.01);
        assert_eq!(c.train.max_epochs, 30);
        assert!(c.train.use_class_weights);
        assert_eq!(c.train.augment_policy.fill, FillMode::Constant(0.5));
        assert_eq!(c.arch, Arch::Baseline);
        assert_eq!(c.dataset, Some(PathBuf::from("/r/data/fer.csv")));
        assert_eq!(c.train.batch_size, 128);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let e = RunConfig::parse("lr0 = 0.1\nbogus = 3\n", Path::new("x"), Path::new(".")).unwrap_err();
        assert!(matches!(e, Error::Config { line: 2, .. }));
        let e = RunConfig::parse("momentum = 1.5\n", Path::new("x"), Path::new(".")).unwrap_err();
        assert!(matches!(e, Error::Config { .. }));
        assert!(RunConfig::parse("lr0\n", Path::new("x"), Path::new(".")).is_err());
    }
}
