//! `fer` command-line entry points.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric abort.

use std::ffi::OsString;
use std::io::Write;
use std::ops::ControlFlow;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use fer_core::augment::AugmentPolicy;
use fer_core::eval::{confusion_matrix, error_report, predict_dataset, predict_image, predict_tta, soft_vote};
use fer_core::interpret::{occlusion_map, render_overlay, saliency_map, OcclusionParams};
use fer_core::model::ModelGraph;
use fer_core::ops::BatchNormConfig;
use fer_core::train::fit;
use fer_core::{Dataset, EmotionLabel, GrayImage, Split, IMAGE_SIDE};
use serde::Serialize;

use crate::config::RunConfig;
use crate::dataset::{load_class_directories, load_fer_csv, stratified_subset, Fer2013, RowPolicy};
use crate::error::{Error, Result};
use crate::report::{self, Metrics};
use crate::{imageio, server, weights};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

/// Seed used by `predict --tta` and `ensemble-eval` unless overridden.
pub const DEFAULT_TTA_SEED: u64 = server::TTA_SEED;

#[derive(Debug, Parser)]
#[command(name = "fer", version, about = "Facial expression recognition toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SplitArg {
    Train,
    Val,
    Test,
    All,
}

#[derive(Debug, Clone, Copy, ValueEnum, Default)]
pub enum Format {
    #[default]
    Json,
    Table,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MethodArg {
    Occlusion,
    Saliency,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model from a key=value config file.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's `dataset`.
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Overrides the config's `weights_out`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Accuracy and confusion matrix of one model on a dataset.
    Eval {
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        /// FER2013 split to evaluate; ignored for directory datasets.
        #[arg(long, value_enum, default_value = "test")]
        split: SplitArg,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        /// Write the misclassification report (JSONL) here.
        #[arg(long)]
        errors: Option<PathBuf>,
        #[arg(long, default_value_t = 5)]
        top_k: usize,
    },
    /// Class probabilities for one image.
    Predict {
        #[arg(long)]
        weights: PathBuf,
        image: PathBuf,
        #[arg(long)]
        tta: bool,
        #[arg(long, default_value_t = DEFAULT_TTA_SEED)]
        seed: u64,
    },
    /// Soft-voting ensemble evaluation from a JSON member list.
    EnsembleEval {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, value_enum, default_value = "test")]
        split: SplitArg,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        #[arg(long, default_value_t = DEFAULT_TTA_SEED)]
        seed: u64,
    },
    /// Render an occlusion or saliency heatmap over an image.
    Explain {
        #[arg(long)]
        weights: PathBuf,
        image: PathBuf,
        #[arg(long, value_enum)]
        method: MethodArg,
        #[arg(long)]
        out: PathBuf,
        /// Target class; defaults to the predicted one.
        #[arg(long)]
        class: Option<EmotionLabel>,
        #[arg(long, default_value_t = 8)]
        patch: usize,
        #[arg(long, default_value_t = 4)]
        stride: usize,
        #[arg(long, default_value_t = 0.5)]
        fill: f32,
        /// Also dump the heatmap values as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Per-class sample counts.
    DatasetStats {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, value_enum, default_value = "table")]
        format: Format,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long)]
        weights: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Root for `/samples`; defaults to FER_DATA_ROOT or ./data.
        #[arg(long)]
        data_root: Option<PathBuf>,
        /// Disable `/samples`.
        #[arg(long)]
        no_samples: bool,
        /// Allowed CORS origin (repeatable); any origin when omitted.
        #[arg(long)]
        cors_origin: Vec<String>,
    },
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numeric() {
                EXIT_NUMERIC
            } else {
                EXIT_DATA
            }
        }
    }
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Train { config, dataset, out } => train(&config, dataset, out),
        Command::Eval {
            weights,
            dataset,
            split,
            format,
            errors,
            top_k,
        } => eval(&weights, &dataset, split, format, errors.as_deref(), top_k),
        Command::Predict {
            weights,
            image,
            tta,
            seed,
        } => predict(&weights, &image, tta, seed),
        Command::EnsembleEval {
            spec,
            dataset,
            split,
            format,
            seed,
        } => ensemble_eval(&spec, &dataset, split, format, seed),
        Command::Explain {
            weights,
            image,
            method,
            out,
            class,
            patch,
            stride,
            fill,
            json,
        } => explain(&weights, &image, method, &out, class, OcclusionParams { patch, stride, fill }, json.as_deref()),
        Command::DatasetStats { dataset, format } => dataset_stats(&dataset, format),
        Command::Serve {
            weights,
            port,
            host,
            data_root,
            no_samples,
            cors_origin,
        } => serve(weights, &host, port, data_root, no_samples, cors_origin),
    }
}

fn print(text: &str) {
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(text.as_bytes());
    if !text.ends_with('\n') {
        let _ = out.write_all(b"\n");
    }
}

fn load_dir(path: &Path, split: Split) -> Result<Dataset> {
    let load = load_class_directories(path, split)?;
    for p in &load.ignored {
        eprintln!("warning: ignoring {} (not a class directory)", p.display());
    }
    for (p, why) in &load.skipped {
        eprintln!("warning: skipped {}: {why}", p.display());
    }
    Ok(load.dataset)
}

fn load_csv(path: &Path) -> Result<Fer2013> {
    load_fer_csv(path, RowPolicy::Strict)
}

/// A FER2013 CSV split, or a whole class-directory tree.
fn load_eval_set(path: &Path, split: SplitArg) -> Result<Dataset> {
    if path.is_dir() {
        return load_dir(path, Split::Test);
    }
    let d = load_csv(path)?;
    Ok(match split {
        SplitArg::Train => d.train,
        SplitArg::Val => d.val,
        SplitArg::Test => d.test,
        SplitArg::All => Dataset::merge(&[&d.train, &d.val, &d.test]),
    })
}

fn train(config_path: &Path, dataset: Option<PathBuf>, out: Option<PathBuf>) -> Result<()> {
    let mut cfg = RunConfig::load(config_path)?;
    if let Some(d) = dataset {
        cfg.dataset = Some(d);
    }
    if let Some(o) = out {
        cfg.weights_out = o;
    }
    let data_path = cfg
        .dataset
        .clone()
        .ok_or_else(|| Error::Format("no dataset given (config key `dataset` or --dataset)".into()))?;
    let seed = cfg.train.seed;
    let (mut train, mut val) = if data_path.is_dir() {
        load_dir(&data_path, Split::Train)?.stratified_split(cfg.train_fraction, seed)?
    } else {
        let d = load_csv(&data_path)?;
        (d.train, d.val)
    };
    let aux: Vec<Dataset> = cfg.aux_dirs.iter().map(|p| load_dir(p, Split::Train)).collect::<Result<_>>()?;
    if !aux.is_empty() {
        let mut parts = vec![&train];
        parts.extend(aux.iter());
        train = Dataset::merge(&parts);
    }
    if let Some(n) = cfg.train_limit {
        train = stratified_subset(&train, n, seed)?;
    }
    if let Some(n) = cfg.val_limit {
        val = stratified_subset(&val, n, seed.wrapping_add(1))?;
    }
    eprintln!("training {} on {} samples, validating on {}", cfg.arch, train.len(), val.len());

    let mut model = ModelGraph::<f32>::build(cfg.arch, seed)?;
    model.set_bn_config(BatchNormConfig {
        momentum: cfg.bn_momentum,
        epsilon: cfg.bn_epsilon,
    });
    let history_path = history_path(&cfg.weights_out);
    std::fs::write(&history_path, b"").map_err(|e| Error::io(&history_path, e))?;
    let mut io_error = None;
    let state = fit(&mut model, &train, &val, &cfg.train, |report| {
        let r = &report.record;
        eprintln!(
            "epoch {:>4}  loss {:.4}  val {:.2}%  lr {}{}",
            r.epoch + 1,
            r.train_loss,
            r.val_accuracy * 100.0,
            r.lr,
            if report.improved { "  *" } else { "" }
        );
        let step = || -> Result<()> {
            report::append_history(&history_path, r)?;
            if report.improved {
                let meta = weights::TrainingMeta {
                    epochs: r.epoch + 1,
                    val_accuracy: Some(r.val_accuracy),
                };
                weights::save(&cfg.weights_out, report.model, meta)?;
            }
            Ok(())
        };
        match step() {
            Ok(()) => ControlFlow::Continue(()),
            Err(e) => {
                io_error = Some(e);
                ControlFlow::Break(())
            }
        }
    })?;
    if let Some(e) = io_error {
        return Err(e);
    }
    eprintln!(
        "best validation accuracy {:.2}% after {} epochs; weights in {}",
        state.best_val_accuracy.unwrap_or(0.0) * 100.0,
        state.epoch,
        cfg.weights_out.display()
    );
    Ok(())
}

/// `<weights>.history.jsonl` next to the weights file.
pub fn history_path(weights: &Path) -> PathBuf {
    let mut s = weights.as_os_str().to_owned();
    s.push(".history.jsonl");
    PathBuf::from(s)
}

fn emit_metrics(metrics: &Metrics, format: Format) {
    match format {
        Format::Json => print(&metrics.to_json()),
        Format::Table => print(&metrics.to_table()),
    }
}

fn eval(weights_path: &Path, data: &Path, split: SplitArg, format: Format, errors: Option<&Path>, top_k: usize) -> Result<()> {
    let (model, _) = weights::load(weights_path)?;
    let dataset = load_eval_set(data, split)?;
    let probs = predict_dataset(&model, &dataset, 256)?;
    let cm = confusion_matrix(&probs, &dataset)?;
    emit_metrics(&Metrics::from_confusion(&cm), format);
    if let Some(path) = errors {
        report::write_error_report(path, &error_report(&probs, &dataset, top_k)?)?;
    }
    Ok(())
}

fn read_input_image(path: &Path) -> Result<GrayImage> {
    let img = imageio::read_gray(path)?;
    if img.width() == IMAGE_SIDE && img.height() == IMAGE_SIDE {
        Ok(img)
    } else {
        Ok(img.resize_bilinear(IMAGE_SIDE, IMAGE_SIDE)?)
    }
}

#[derive(Serialize)]
struct Prediction {
    probabilities: Vec<f32>,
    label: EmotionLabel,
}

fn predict(weights_path: &Path, image: &Path, tta: bool, seed: u64) -> Result<()> {
    let (model, _) = weights::load(weights_path)?;
    let img = read_input_image(image)?;
    let policy = AugmentPolicy::default();
    let probabilities = predict_image(&model, &img, tta.then_some((&policy, seed)))?;
    let label = EmotionLabel::ALL[fer_core::eval::argmax(&probabilities)];
    print(&serde_json::to_string(&Prediction { probabilities, label }).expect("serializes"));
    Ok(())
}

fn ensemble_eval(spec: &Path, data: &Path, split: SplitArg, format: Format, seed: u64) -> Result<()> {
    let members = report::read_ensemble_spec(spec)?;
    let dataset = load_eval_set(data, split)?;
    let policy = AugmentPolicy::default();
    let mut per_member = Vec::with_capacity(members.len());
    for (index, m) in members.iter().enumerate() {
        let wrap = |e: Error| Error::Member {
            index,
            path: m.weights_path.clone(),
            source: Box::new(e),
        };
        let (model, _) = weights::load(&m.weights_path).map_err(wrap)?;
        let probs = if m.tta {
            dataset
                .samples()
                .iter()
                .map(|s| predict_tta(&model, s.image(), &policy, seed))
                .collect::<fer_core::Result<Vec<_>>>()
        } else {
            predict_dataset(&model, &dataset, 256)
        };
        per_member.push(probs.map_err(|e| wrap(e.into()))?);
    }
    let voted = (0..dataset.len())
        .map(|i| soft_vote(&per_member.iter().map(|p| p[i].as_slice()).collect::<Vec<_>>()))
        .collect::<fer_core::Result<Vec<_>>>()?;
    emit_metrics(&Metrics::from_confusion(&confusion_matrix(&voted, &dataset)?), format);
    Ok(())
}

fn explain(
    weights_path: &Path,
    image: &Path,
    method: MethodArg,
    out: &Path,
    class: Option<EmotionLabel>,
    params: OcclusionParams,
    json: Option<&Path>,
) -> Result<()> {
    let (model, _) = weights::load(weights_path)?;
    let img = read_input_image(image)?;
    let target = class.map(EmotionLabel::index);
    let heatmap = match method {
        MethodArg::Occlusion => occlusion_map(&model, &img, params, target)?,
        MethodArg::Saliency => {
            let t = match target {
                Some(t) => t,
                None => fer_core::eval::argmax(&predict_image(&model, &img, None)?),
            };
            saliency_map(&model, &img, t)?
        }
    };
    let rgb = render_overlay(&heatmap, &img, 0.5)?;
    imageio::write_rgb_png(out, heatmap.width, heatmap.height, rgb)?;
    if let Some(path) = json {
        let text = serde_json::to_string(&heatmap).expect("heatmap serializes");
        std::fs::write(path, text).map_err(|e| Error::io(path, e))?;
    }
    eprintln!("{} heatmap for {} written to {}", method_name(method), heatmap.target_class, out.display());
    Ok(())
}

fn method_name(m: MethodArg) -> &'static str {
    match m {
        MethodArg::Occlusion => "occlusion",
        MethodArg::Saliency => "saliency",
    }
}

#[derive(Serialize)]
struct SplitCounts {
    split: String,
    counts: [usize; 7],
    total: usize,
}

fn dataset_stats(data: &Path, format: Format) -> Result<()> {
    let rows: Vec<SplitCounts> = if data.is_dir() {
        let d = load_dir(data, Split::Train)?;
        vec![SplitCounts {
            split: "all".into(),
            counts: d.class_counts(),
            total: d.len(),
        }]
    } else {
        let d = load_csv(data)?;
        let mut rows: Vec<SplitCounts> = [("train", &d.train), ("val", &d.val), ("test", &d.test)]
            .into_iter()
            .map(|(name, s)| SplitCounts {
                split: name.into(),
                counts: s.class_counts(),
                total: s.len(),
            })
            .collect();
        rows.push(SplitCounts {
            split: "all".into(),
            counts: d.class_counts(),
            total: d.total(),
        });
        rows
    };
    match format {
        Format::Json => print(&serde_json::to_string_pretty(&rows).expect("serializes")),
        Format::Table => {
            let mut s = format!("{:<6}", "split");
            for l in EmotionLabel::ALL {
                s.push_str(&format!(" {:>8}", l.name()));
            }
            s.push_str(&format!(" {:>8}\n", "total"));
            for r in &rows {
                s.push_str(&format!("{:<6}", r.split));
                for c in r.counts {
                    s.push_str(&format!(" {c:>8}"));
                }
                s.push_str(&format!(" {:>8}\n", r.total));
            }
            print(&s);
        }
    }
    Ok(())
}

fn serve(
    weights_path: PathBuf,
    host: &str,
    port: u16,
    data_root: Option<PathBuf>,
    no_samples: bool,
    cors_origins: Vec<String>,
) -> Result<()> {
    let data_root = (!no_samples).then(|| data_root.unwrap_or_else(server::default_data_root));
    let state = server::AppState::new(server::ServiceConfig { data_root, cors_origins });
    let runtime = tokio::runtime::Runtime::new().map_err(|e| Error::io("tokio runtime", e))?;
    runtime.block_on(async move {
        let addr = format!("{host}:{port}");
        let listener = tokio::net::TcpListener::bind(&addr).await.map_err(|e| Error::io(&addr, e))?;
        eprintln!("listening on http://{}", listener.local_addr().map_err(|e| Error::io(&addr, e))?);
        let loader = state.clone();
        let load = tokio::task::spawn_blocking(move || -> Result<()> {
            let bytes = std::fs::read(&weights_path).map_err(|e| Error::io(&weights_path, e))?;
            let loaded = server::LoadedModel::from_weights_bytes(&bytes)?;
            eprintln!("model {} ready", loaded.model_id);
            loader.set_model(loaded);
            Ok(())
        });
        let server = server::serve(listener, state);
        tokio::pin!(server);
        tokio::select! {
            res = &mut server => return res.map_err(|e| Error::io(&addr, e)),
            loaded = load => loaded.map_err(|e| Error::Format(e.to_string()))??,
        }
        server.await.map_err(|e| Error::io(&addr, e))
    })
}
