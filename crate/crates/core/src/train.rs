//! SGD with momentum, weight decay, the plateau-halving learning-rate
//! schedule, and the epoch loop.

use alloc::string::String;
use alloc::vec::Vec;
use core::ops::ControlFlow;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::augment::{augment_image, AugmentPolicy};
use crate::data::{class_weights, image_batch, Dataset, NUM_CLASSES};
use crate::error::{arg_err, shape_err, Error, Result};
use crate::eval;
use crate::model::{ModelGraph, ParamInfo};
use crate::ops::softmax_cross_entropy;
use crate::{rng, Real, Tensor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr0: f64,
    pub batch_size: usize,
    pub momentum: f64,
    pub weight_decay: f64,
    pub max_epochs: usize,
    pub plateau_patience: usize,
    pub lr_factor: f64,
    pub use_class_weights: bool,
    /// Apply `augment_policy` to every training sample.
    pub augment: bool,
    pub augment_policy: AugmentPolicy,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr0: 0.1,
            batch_size: 128,
            momentum: 0.9,
            weight_decay: 0.0001,
            max_epochs: 300,
            plateau_patience: 10,
            lr_factor: 0.5,
            use_class_weights: false,
            augment: true,
            augment_policy: AugmentPolicy::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// `lr0 = 0` is accepted: it runs the loop with frozen parameters.
    pub fn validate(&self) -> Result<()> {
        if !(self.lr0 >= 0.0 && self.lr0.is_finite()) {
            return Err(arg_err!("lr0 must be finite and >= 0, got {}", self.lr0));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(arg_err!("momentum must be in [0, 1), got {}", self.momentum));
        }
        if !(self.lr_factor > 0.0 && self.lr_factor < 1.0) {
            return Err(arg_err!("lr_factor must be in (0, 1), got {}", self.lr_factor));
        }
        if self.plateau_patience == 0 {
            return Err(arg_err!("plateau_patience must be >= 1"));
        }
        if self.batch_size == 0 {
            return Err(arg_err!("batch_size must be >= 1"));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(arg_err!("weight_decay must be finite and >= 0, got {}", self.weight_decay));
        }
        self.augment_policy.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_accuracy: f64,
    pub lr: f64,
}

#[derive(Debug, Clone)]
pub struct TrainState<T: Real = f32> {
    /// Completed epochs.
    pub epoch: usize,
    pub current_lr: f64,
    pub velocity: Vec<Tensor<T>>,
    /// `None` until the first validation.
    pub best_val_accuracy: Option<f64>,
    pub epochs_since_improvement: usize,
    pub halvings: u32,
    pub history: Vec<EpochRecord>,
}

impl<T: Real> TrainState<T> {
    pub fn new(model: &ModelGraph<T>, config: &TrainConfig) -> Self {
        Self {
            epoch: 0,
            current_lr: config.lr0,
            velocity: model.params().iter().map(|(_, p)| Tensor::zeros(p.shape())).collect(),
            best_val_accuracy: None,
            epochs_since_improvement: 0,
            halvings: 0,
            history: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgdHyper {
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
}

/// One momentum-SGD update:
/// `g' = g + wd·w` (decayed parameters only), `v ← μ·v − lr·g'`, `w ← w + v`.
///
/// Gradients are checked before any parameter moves; a non-finite entry
/// returns [`Error::NonFiniteGradient`] naming the parameter (epoch/batch left
/// at zero for the caller to fill in).
pub fn sgd_step<T: Real>(
    params: Vec<(ParamInfo, &mut Tensor<T>)>,
    grads: &[Tensor<T>],
    velocity: &mut [Tensor<T>],
    hyper: SgdHyper,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != velocity.len() {
        return Err(arg_err!(
            "{} parameters, {} gradients, {} velocities",
            params.len(),
            grads.len(),
            velocity.len()
        ));
    }
    for ((info, p), (g, v)) in params.iter().zip(grads.iter().zip(velocity.iter())) {
        if p.shape() != g.shape() || p.shape() != v.shape() {
            return Err(shape_err!("{}: parameter/gradient/velocity shapes differ", info.name));
        }
        if !g.all_finite() {
            return Err(Error::NonFiniteGradient {
                layer: info.name.clone(),
                epoch: 0,
                batch: 0,
            });
        }
    }
    let lr = T::of(hyper.lr);
    let mu = T::of(hyper.momentum);
    let wd = T::of(hyper.weight_decay);
    for ((info, p), (g, v)) in params.into_iter().zip(grads.iter().zip(velocity.iter_mut())) {
        let decay = info.decay && hyper.weight_decay != 0.0;
        for ((w, &g), v) in p.data_mut().iter_mut().zip(g.data()).zip(v.data_mut()) {
            let g = if decay { g + wd * *w } else { g };
            *v = mu * *v - lr * g;
            *w += *v;
        }
    }
    Ok(())
}

/// Epoch-end schedule update. A strictly better validation accuracy resets
/// patience; `plateau_patience` non-improving epochs multiply the learning
/// rate by `lr_factor`. Returns the learning rate for the next epoch.
pub fn lr_schedule_step<T: Real>(state: &mut TrainState<T>, val_accuracy: f64, config: &TrainConfig) -> f64 {
    let improved = state.best_val_accuracy.is_none_or(|best| val_accuracy > best);
    if improved {
        state.best_val_accuracy = Some(val_accuracy);
        state.epochs_since_improvement = 0;
    } else {
        state.epochs_since_improvement += 1;
        if state.epochs_since_improvement >= config.plateau_patience {
            state.halvings += 1;
            state.current_lr *= config.lr_factor;
            state.epochs_since_improvement = 0;
        }
    }
    state.current_lr
}

/// What the epoch loop reports after each validation.
pub struct EpochReport<'a> {
    pub record: EpochRecord,
    /// Validation accuracy strictly improved; `model` is the new best.
    pub improved: bool,
    pub model: &'a ModelGraph<f32>,
}

fn weight_vector(train: &Dataset, config: &TrainConfig) -> Result<[f32; NUM_CLASSES]> {
    if !config.use_class_weights {
        return Ok([1.0; NUM_CLASSES]);
    }
    Ok(class_weights(&train.class_counts())?.map(|w| w as f32))
}

/// Runs one training epoch and returns the mean per-sample training loss.
pub fn train_epoch(
    model: &mut ModelGraph<f32>,
    train: &Dataset,
    config: &TrainConfig,
    state: &mut TrainState<f32>,
    weights: &[f32; NUM_CLASSES],
) -> Result<f64> {
    let epoch = state.epoch;
    let mut order: Vec<usize> = (0..train.len()).collect();
    order.shuffle(&mut rng::rng(rng::derive_seed(config.seed, &[epoch as u64])));
    let samples = train.samples();
    let mut loss_sum = 0.0;
    for (b, chunk) in order.chunks(config.batch_size).enumerate() {
        let images: Vec<_> = chunk
            .iter()
            .map(|&i| {
                let img = samples[i].image();
                if config.augment {
                    let s = rng::derive_seed(config.seed, &[epoch as u64, i as u64]);
                    augment_image(img, &config.augment_policy, s)
                } else {
                    img.clone()
                }
            })
            .collect();
        let labels: Vec<usize> = chunk.iter().map(|&i| samples[i].label().index()).collect();
        let x = image_batch::<f32>(&images)?;
        let dropout_seed = rng::derive_seed(config.seed, &[epoch as u64, b as u64, 0xD20F]);
        let fwd = model.forward_train(&x, dropout_seed)?;
        let loss = softmax_cross_entropy(&fwd.logits, &labels, weights)?;
        if !loss.loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch, batch: b });
        }
        loss_sum += loss.loss as f64 * chunk.len() as f64;
        let grads = model.backward(&fwd, &loss.logits_grad)?;
        let hyper = SgdHyper {
            lr: state.current_lr,
            momentum: config.momentum,
            weight_decay: config.weight_decay,
        };
        sgd_step(model.params_mut(), &grads.params, &mut state.velocity, hyper).map_err(|e| match e {
            Error::NonFiniteGradient { layer, .. } => Error::NonFiniteGradient { layer, epoch, batch: b },
            other => other,
        })?;
    }
    Ok(loss_sum / train.len() as f64)
}

/// Trains `model` on `train`, validating on `val` after every epoch.
///
/// The observer sees each epoch's record together with the current model and
/// may stop training early by returning `ControlFlow::Break`. On return
/// `model` holds the parameters of the best validation epoch.
pub fn fit(
    model: &mut ModelGraph<f32>,
    train: &Dataset,
    val: &Dataset,
    config: &TrainConfig,
    mut observer: impl FnMut(&EpochReport<'_>) -> ControlFlow<()>,
) -> Result<TrainState<f32>> {
    config.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(arg_err!("training and validation sets must be non-empty"));
    }
    let weights = weight_vector(train, config)?;
    let mut state = TrainState::new(model, config);
    let mut best: Option<ModelGraph<f32>> = None;
    while state.epoch < config.max_epochs {
        let lr = state.current_lr;
        let train_loss = train_epoch(model, train, config, &mut state, &weights)?;
        let val_accuracy = eval::accuracy_of(model, val, EVAL_BATCH)?;
        let improved = state.best_val_accuracy.is_none_or(|b| val_accuracy > b);
        lr_schedule_step(&mut state, val_accuracy, config);
        let record = EpochRecord {
            epoch: state.epoch,
            train_loss,
            val_accuracy,
            lr,
        };
        state.history.push(record);
        state.epoch += 1;
        if improved {
            best = Some(model.clone());
        }
        let flow = observer(&EpochReport {
            record,
            improved,
            model,
        });
        if flow.is_break() {
            break;
        }
    }
    if let Some(best) = best {
        *model = best;
    }
    Ok(state)
}

const EVAL_BATCH: usize = 256;

/// Name of a parameter that holds a non-finite value, if any.
pub fn first_non_finite_param<T: Real>(model: &ModelGraph<T>) -> Option<String> {
    model
        .params()
        .into_iter()
        .find(|(_, t)| !t.all_finite())
        .map(|(i, _)| i.name)
}
