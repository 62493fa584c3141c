//! Network assembly: layer specifications, the five-layer and baseline
//! architectures, forward/backward passes over a whole graph, and parameter
//! bookkeeping.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{arg_err, shape_err, Error, Result};
use crate::ops::{self, BatchNormCache, BatchNormConfig, DropoutMask, Mode, Padding, RunningStats};
use crate::{rng, Real, Tensor, IMAGE_SIDE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Arch {
    #[serde(rename = "five-layer")]
    FiveLayer,
    #[serde(rename = "baseline")]
    Baseline,
    /// A hand-assembled graph (tests, experiments).
    #[serde(rename = "custom")]
    Custom,
}

impl Arch {
    pub fn as_str(self) -> &'static str {
        match self {
            Arch::FiveLayer => "five-layer",
            Arch::Baseline => "baseline",
            Arch::Custom => "custom",
        }
    }
}

impl fmt::Display for Arch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Arch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "five-layer" | "five_layer" | "fivelayer" => Ok(Arch::FiveLayer),
            "baseline" => Ok(Arch::Baseline),
            "custom" => Ok(Arch::Custom),
            other => Err(arg_err!("unknown architecture {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Conv {
        filters: usize,
        kernel: usize,
        stride: usize,
        padding: Padding,
    },
    MaxPool {
        kernel: usize,
        stride: usize,
        ceil_mode: bool,
    },
    Dense {
        units: usize,
    },
    BatchNorm,
    Relu,
    Dropout {
        rate: f64,
    },
    Flatten,
    SoftmaxHead,
}

impl LayerSpec {
    fn conv(filters: usize, kernel: usize) -> Self {
        LayerSpec::Conv {
            filters,
            kernel,
            stride: 1,
            padding: Padding::Same,
        }
    }

    fn pool(kernel: usize, stride: usize, ceil_mode: bool) -> Self {
        LayerSpec::MaxPool {
            kernel,
            stride,
            ceil_mode,
        }
    }
}

/// Width of the baseline's hidden dense layer. Not given by the original
/// description; chosen so the parameter count lands on 37.8m.
pub const BASELINE_DENSE_WIDTH: usize = 8192;

/// Layer stack of a named architecture for a 1×48×48 input.
pub fn arch_specs(arch: Arch) -> Result<Vec<LayerSpec>> {
    use LayerSpec::*;
    match arch {
        Arch::FiveLayer => {
            let mut s = Vec::new();
            for (filters, kernel) in [(32, 5), (32, 4), (64, 5)] {
                s.extend([LayerSpec::conv(filters, kernel), BatchNorm, Relu, LayerSpec::pool(3, 2, true)]);
            }
            s.extend([
                Flatten,
                Dense { units: 1024 },
                BatchNorm,
                Relu,
                Dropout { rate: 0.3 },
                Dense { units: 7 },
                SoftmaxHead,
            ]);
            Ok(s)
        }
        Arch::Baseline => {
            let block = [LayerSpec::conv(32, 3), BatchNorm, Relu];
            let mut s = Vec::new();
            for _ in 0..2 {
                s.extend(block);
                s.extend(block);
                s.push(LayerSpec::pool(2, 2, false));
            }
            s.extend([
                Flatten,
                Dense {
                    units: BASELINE_DENSE_WIDTH,
                },
                Relu,
                Dropout { rate: 0.5 },
                Dense { units: 7 },
                SoftmaxHead,
            ]);
            Ok(s)
        }
        Arch::Custom => Err(arg_err!("custom architectures have no canonical layer stack")),
    }
}

#[derive(Debug, Clone)]
enum Layer<T> {
    Conv {
        weight: Tensor<T>,
        bias: Tensor<T>,
        padding: Padding,
        stride: usize,
    },
    MaxPool {
        kernel: usize,
        stride: usize,
        ceil_mode: bool,
    },
    Dense {
        weight: Tensor<T>,
        bias: Tensor<T>,
    },
    BatchNorm {
        gamma: Tensor<T>,
        beta: Tensor<T>,
        running: RunningStats<T>,
    },
    Relu,
    Dropout {
        rate: f64,
    },
    Flatten,
    SoftmaxHead,
}

/// Whether a parameter participates in weight decay.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamInfo {
    pub name: String,
    pub decay: bool,
}

/// Per-layer values kept by a forward pass for [`ModelGraph::backward`].
#[derive(Debug, Clone)]
enum Cache<T> {
    Input(Tensor<T>),
    Pool { shape: Vec<usize>, argmax: Vec<usize> },
    Bn(BatchNormCache<T>),
    Dropout(Option<DropoutMask<T>>),
    Shape(Vec<usize>),
    Nothing,
}

/// Output of a recorded forward pass.
#[derive(Debug, Clone)]
pub struct Forward<T> {
    pub logits: Tensor<T>,
    tape: Vec<Cache<T>>,
}

/// Gradients of a whole graph; `params` follows [`ModelGraph::params`] order.
#[derive(Debug, Clone)]
pub struct Gradients<T> {
    pub input: Tensor<T>,
    pub params: Vec<Tensor<T>>,
}

/// Ordered layer stack with learnable parameters and batchnorm statistics.
#[derive(Debug, Clone)]
pub struct ModelGraph<T: Real = f32> {
    arch: Arch,
    input_shape: [usize; 3],
    specs: Vec<LayerSpec>,
    names: Vec<String>,
    layers: Vec<Layer<T>>,
    bn_config: BatchNormConfig,
}

fn he_normal<T: Real>(shape: &[usize], fan_in: usize, seed: u64) -> Tensor<T> {
    let std = libm::sqrt(2.0 / fan_in as f64);
    let normal = Normal::new(0.0, std).expect("finite std");
    let mut r = rng::rng(seed);
    Tensor::from_fn(shape, |_| T::of(normal.sample(&mut r)))
}

impl<T: Real> ModelGraph<T> {
    /// One of the two named architectures, He-initialized from `seed`.
    pub fn build(arch: Arch, seed: u64) -> Result<Self> {
        Self::from_specs(arch, &arch_specs(arch)?, [1, IMAGE_SIDE, IMAGE_SIDE], seed)
    }

    /// Instantiates an arbitrary stack, checking shape compatibility layer by
    /// layer for a C×H×W input.
    pub fn from_specs(arch: Arch, specs: &[LayerSpec], input_shape: [usize; 3], seed: u64) -> Result<Self> {
        if specs.is_empty() {
            return Err(arg_err!("model needs at least one layer"));
        }
        if input_shape.contains(&0) {
            return Err(shape_err!("input shape {input_shape:?} has a zero extent"));
        }
        let mut shape: Vec<usize> = input_shape.to_vec();
        let mut layers = Vec::with_capacity(specs.len());
        let mut names = Vec::with_capacity(specs.len());
        let mut counters = [0usize; 8];
        let mut next_name = |slot: usize, prefix: &str| {
            counters[slot] += 1;
            format!("{prefix}{}", counters[slot])
        };
        for (i, spec) in specs.iter().enumerate() {
            let layer_seed = rng::derive_seed(seed, &[i as u64]);
            let (layer, name) = match *spec {
                LayerSpec::Conv {
                    filters,
                    kernel,
                    stride,
                    padding,
                } => {
                    let [c, h, w] = as3(&shape, "conv")?;
                    if filters == 0 {
                        return Err(arg_err!("conv layer needs at least one filter"));
                    }
                    let (oh, _) = ops::conv_output_size(h, kernel, stride, padding)?;
                    let (ow, _) = ops::conv_output_size(w, kernel, stride, padding)?;
                    shape = vec![filters, oh, ow];
                    let layer = Layer::Conv {
                        weight: he_normal(&[filters, c, kernel, kernel], c * kernel * kernel, layer_seed),
                        bias: Tensor::zeros(&[filters]),
                        padding,
                        stride,
                    };
                    (layer, next_name(0, "conv"))
                }
                LayerSpec::MaxPool {
                    kernel,
                    stride,
                    ceil_mode,
                } => {
                    let [c, h, w] = as3(&shape, "maxpool")?;
                    shape = vec![
                        c,
                        ops::pool_output_size(h, kernel, stride, ceil_mode)?,
                        ops::pool_output_size(w, kernel, stride, ceil_mode)?,
                    ];
                    (
                        Layer::MaxPool {
                            kernel,
                            stride,
                            ceil_mode,
                        },
                        next_name(1, "pool"),
                    )
                }
                LayerSpec::Dense { units } => {
                    let [d] = *shape.as_slice() else {
                        return Err(shape_err!("dense layer needs a flat input, got {shape:?}"));
                    };
                    if units == 0 {
                        return Err(arg_err!("dense layer needs at least one unit"));
                    }
                    shape = vec![units];
                    let layer = Layer::Dense {
                        weight: he_normal(&[d, units], d, layer_seed),
                        bias: Tensor::zeros(&[units]),
                    };
                    (layer, next_name(2, "dense"))
                }
                LayerSpec::BatchNorm => {
                    let c = shape[0];
                    let layer = Layer::BatchNorm {
                        gamma: Tensor::full(&[c], T::one()),
                        beta: Tensor::zeros(&[c]),
                        running: RunningStats::new(c),
                    };
                    (layer, next_name(3, "bn"))
                }
                LayerSpec::Relu => (Layer::Relu, next_name(4, "relu")),
                LayerSpec::Dropout { rate } => {
                    if !(0.0..1.0).contains(&rate) {
                        return Err(arg_err!("dropout rate must be in [0, 1), got {rate}"));
                    }
                    (Layer::Dropout { rate }, next_name(5, "dropout"))
                }
                LayerSpec::Flatten => {
                    shape = vec![shape.iter().product()];
                    (Layer::Flatten, next_name(6, "flatten"))
                }
                LayerSpec::SoftmaxHead => {
                    if i + 1 != specs.len() {
                        return Err(arg_err!("softmax head must be the last layer"));
                    }
                    if shape.len() != 1 {
                        return Err(shape_err!("softmax head needs a flat input, got {shape:?}"));
                    }
                    (Layer::SoftmaxHead, String::from("softmax"))
                }
            };
            layers.push(layer);
            names.push(name);
        }
        if shape.len() != 1 {
            return Err(shape_err!("model output must be flat, got {shape:?}"));
        }
        Ok(Self {
            arch,
            input_shape,
            specs: specs.to_vec(),
            names,
            layers,
            bn_config: BatchNormConfig::default(),
        })
    }

    pub fn arch(&self) -> Arch {
        self.arch
    }

    pub fn specs(&self) -> &[LayerSpec] {
        &self.specs
    }

    pub fn layer_names(&self) -> &[String] {
        &self.names
    }

    /// C×H×W of one input image.
    pub fn input_shape(&self) -> [usize; 3] {
        self.input_shape
    }

    pub fn bn_config(&self) -> BatchNormConfig {
        self.bn_config
    }

    pub fn set_bn_config(&mut self, config: BatchNormConfig) {
        self.bn_config = config;
    }

    /// Number of output classes (width of the logits).
    pub fn num_classes(&self) -> usize {
        self.layers
            .iter()
            .rev()
            .find_map(|l| match l {
                Layer::Dense { bias, .. } => Some(bias.len()),
                _ => None,
            })
            .unwrap_or_else(|| self.input_shape.iter().product())
    }

    /// Width of the activation entering the first dense layer.
    pub fn flatten_width(&self) -> Option<usize> {
        self.layers.iter().find_map(|l| match l {
            Layer::Dense { weight, .. } => Some(weight.shape()[0]),
            _ => None,
        })
    }

    /// Learnable parameter tensors with their names, in update order.
    pub fn params(&self) -> Vec<(ParamInfo, &Tensor<T>)> {
        let mut out = Vec::new();
        for (layer, name) in self.layers.iter().zip(&self.names) {
            match layer {
                Layer::Conv { weight, bias, .. } | Layer::Dense { weight, bias } => {
                    out.push((info(name, "weight", true), weight));
                    out.push((info(name, "bias", false), bias));
                }
                Layer::BatchNorm { gamma, beta, .. } => {
                    out.push((info(name, "gamma", false), gamma));
                    out.push((info(name, "beta", false), beta));
                }
                _ => {}
            }
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<(ParamInfo, &mut Tensor<T>)> {
        let mut out = Vec::new();
        for (layer, name) in self.layers.iter_mut().zip(&self.names) {
            match layer {
                Layer::Conv { weight, bias, .. } | Layer::Dense { weight, bias } => {
                    out.push((info(name, "weight", true), weight));
                    out.push((info(name, "bias", false), bias));
                }
                Layer::BatchNorm { gamma, beta, .. } => {
                    out.push((info(name, "gamma", false), gamma));
                    out.push((info(name, "beta", false), beta));
                }
                _ => {}
            }
        }
        out
    }

    /// Every persisted tensor: parameters plus batchnorm running statistics.
    pub fn named_tensors(&self) -> Vec<(String, &Tensor<T>)> {
        let mut out = Vec::new();
        for (layer, name) in self.layers.iter().zip(&self.names) {
            match layer {
                Layer::Conv { weight, bias, .. } | Layer::Dense { weight, bias } => {
                    out.push((format!("{name}.weight"), weight));
                    out.push((format!("{name}.bias"), bias));
                }
                Layer::BatchNorm { gamma, beta, running } => {
                    out.push((format!("{name}.gamma"), gamma));
                    out.push((format!("{name}.beta"), beta));
                    out.push((format!("{name}.running_mean"), &running.mean));
                    out.push((format!("{name}.running_var"), &running.var));
                }
                _ => {}
            }
        }
        out
    }

    pub fn named_tensors_mut(&mut self) -> Vec<(String, &mut Tensor<T>)> {
        let mut out = Vec::new();
        for (layer, name) in self.layers.iter_mut().zip(&self.names) {
            match layer {
                Layer::Conv { weight, bias, .. } | Layer::Dense { weight, bias } => {
                    out.push((format!("{name}.weight"), weight));
                    out.push((format!("{name}.bias"), bias));
                }
                Layer::BatchNorm { gamma, beta, running } => {
                    out.push((format!("{name}.gamma"), gamma));
                    out.push((format!("{name}.beta"), beta));
                    out.push((format!("{name}.running_mean"), &mut running.mean));
                    out.push((format!("{name}.running_var"), &mut running.var));
                }
                _ => {}
            }
        }
        out
    }

    /// Total element count of learnable tensors (running statistics excluded).
    pub fn param_count(&self) -> usize {
        self.params().iter().map(|(_, t)| t.len()).sum()
    }

    /// Same graph with every tensor converted to another float type.
    pub fn cast<U: Real>(&self) -> ModelGraph<U> {
        let layers = self
            .layers
            .iter()
            .map(|l| match l {
                Layer::Conv {
                    weight,
                    bias,
                    padding,
                    stride,
                } => Layer::Conv {
                    weight: weight.cast(),
                    bias: bias.cast(),
                    padding: *padding,
                    stride: *stride,
                },
                Layer::MaxPool {
                    kernel,
                    stride,
                    ceil_mode,
                } => Layer::MaxPool {
                    kernel: *kernel,
                    stride: *stride,
                    ceil_mode: *ceil_mode,
                },
                Layer::Dense { weight, bias } => Layer::Dense {
                    weight: weight.cast(),
                    bias: bias.cast(),
                },
                Layer::BatchNorm { gamma, beta, running } => Layer::BatchNorm {
                    gamma: gamma.cast(),
                    beta: beta.cast(),
                    running: RunningStats {
                        mean: running.mean.cast(),
                        var: running.var.cast(),
                    },
                },
                Layer::Relu => Layer::Relu,
                Layer::Dropout { rate } => Layer::Dropout { rate: *rate },
                Layer::Flatten => Layer::Flatten,
                Layer::SoftmaxHead => Layer::SoftmaxHead,
            })
            .collect();
        ModelGraph {
            arch: self.arch,
            input_shape: self.input_shape,
            specs: self.specs.clone(),
            names: self.names.clone(),
            layers,
            bn_config: self.bn_config,
        }
    }

    fn check_input(&self, input: &Tensor<T>) -> Result<()> {
        let [_, c, h, w] = input.dims4()?;
        if [c, h, w] != self.input_shape {
            return Err(shape_err!(
                "model expects N×{}×{}×{} input, got {:?}",
                self.input_shape[0],
                self.input_shape[1],
                self.input_shape[2],
                input.shape()
            ));
        }
        Ok(())
    }

    /// Shared forward driver. `running` is `Some` only in train mode, where
    /// batch statistics are folded into it.
    fn run(
        &self,
        input: &Tensor<T>,
        mode: Mode,
        seed: u64,
        record: bool,
        mut bn_updates: Option<&mut Vec<RunningStats<T>>>,
    ) -> Result<Forward<T>> {
        self.check_input(input)?;
        let mut x = input.clone();
        let mut tape = Vec::with_capacity(if record { self.layers.len() } else { 0 });
        let mut bn_index = 0;
        for (i, layer) in self.layers.iter().enumerate() {
            let (y, cache) = match layer {
                Layer::Conv {
                    weight,
                    bias,
                    padding,
                    stride,
                } => (ops::conv2d(&x, weight, bias, *padding, *stride)?, Cache::Input(x)),
                Layer::MaxPool {
                    kernel,
                    stride,
                    ceil_mode,
                } => {
                    let (y, argmax) = ops::maxpool2d_with_indices(&x, *kernel, *stride, *ceil_mode)?;
                    (
                        y,
                        Cache::Pool {
                            shape: x.shape().to_vec(),
                            argmax,
                        },
                    )
                }
                Layer::Dense { weight, bias } => (ops::dense(&x, weight, bias)?, Cache::Input(x)),
                Layer::BatchNorm { gamma, beta, running } => {
                    let (y, cache) = match bn_updates.as_deref_mut() {
                        Some(stats) => {
                            let (y, c) =
                                ops::batchnorm(&x, gamma, beta, mode, &mut stats[bn_index], self.bn_config)?;
                            (y, c)
                        }
                        None => {
                            let mut frozen = running.clone();
                            ops::batchnorm(&x, gamma, beta, mode, &mut frozen, self.bn_config)?
                        }
                    };
                    bn_index += 1;
                    (y, Cache::Bn(cache))
                }
                Layer::Relu => (ops::relu(&x), Cache::Input(x)),
                Layer::Dropout { rate } => {
                    let s = rng::derive_seed(seed, &[i as u64]);
                    let (y, mask) = ops::dropout(&x, *rate, mode, s)?;
                    (y, Cache::Dropout(mask))
                }
                Layer::Flatten => {
                    let n = x.shape()[0];
                    let shape = x.shape().to_vec();
                    let per = x.len() / n;
                    (x.reshape(&[n, per])?, Cache::Shape(shape))
                }
                Layer::SoftmaxHead => {
                    // logits stop here; probabilities are taken by callers
                    (x, Cache::Nothing)
                }
            };
            if record {
                tape.push(cache);
            }
            x = y;
        }
        Ok(Forward { logits: x, tape })
    }

    /// Train-mode forward: batch statistics, active dropout, running
    /// statistics updated. The returned tape feeds [`Self::backward`].
    pub fn forward_train(&mut self, input: &Tensor<T>, seed: u64) -> Result<Forward<T>> {
        let mut stats: Vec<RunningStats<T>> = self
            .layers
            .iter()
            .filter_map(|l| match l {
                Layer::BatchNorm { running, .. } => Some(running.clone()),
                _ => None,
            })
            .collect();
        let fwd = self.run(input, Mode::Train, seed, true, Some(&mut stats))?;
        let mut stats = stats.into_iter();
        for layer in &mut self.layers {
            if let Layer::BatchNorm { running, .. } = layer {
                *running = stats.next().expect("one entry per batchnorm");
            }
        }
        Ok(fwd)
    }

    /// Infer-mode forward that records a tape (used for input gradients).
    pub fn forward_infer(&self, input: &Tensor<T>) -> Result<Forward<T>> {
        self.run(input, Mode::Infer, 0, true, None)
    }

    /// Infer-mode logits without recording.
    pub fn logits(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(self.run(input, Mode::Infer, 0, false, None)?.logits)
    }

    /// Infer-mode class probabilities, one row per input image.
    pub fn forward_probs(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        ops::softmax(&self.logits(input)?)
    }

    /// Backpropagates `logits_grad` through a recorded forward pass.
    pub fn backward(&self, fwd: &Forward<T>, logits_grad: &Tensor<T>) -> Result<Gradients<T>> {
        if fwd.tape.len() != self.layers.len() {
            return Err(arg_err!("forward pass was not recorded"));
        }
        if logits_grad.shape() != fwd.logits.shape() {
            return Err(shape_err!(
                "logits gradient {:?} does not match logits {:?}",
                logits_grad.shape(),
                fwd.logits.shape()
            ));
        }
        let mut grad = logits_grad.clone();
        let mut param_grads: Vec<Vec<Tensor<T>>> = Vec::with_capacity(self.layers.len());
        for (layer, cache) in self.layers.iter().zip(&fwd.tape).rev() {
            let lg = match (layer, cache) {
                (
                    Layer::Conv {
                        weight,
                        padding,
                        stride,
                        ..
                    },
                    Cache::Input(x),
                ) => ops::conv2d_backward(x, weight, *padding, *stride, &grad)?,
                (Layer::MaxPool { .. }, Cache::Pool { shape, argmax }) => {
                    ops::maxpool2d_backward(shape, argmax, &grad)?
                }
                (Layer::Dense { weight, .. }, Cache::Input(x)) => ops::dense_backward(x, weight, &grad)?,
                (Layer::BatchNorm { gamma, .. }, Cache::Bn(c)) => ops::batchnorm_backward(c, gamma, &grad)?,
                (Layer::Relu, Cache::Input(x)) => ops::relu_backward(x, &grad)?,
                (Layer::Dropout { .. }, Cache::Dropout(mask)) => ops::dropout_backward(mask.as_ref(), &grad)?,
                (Layer::Flatten, Cache::Shape(shape)) => ops::LayerGrad {
                    input_grad: grad.reshape(shape)?,
                    param_grads: Vec::new(),
                },
                (Layer::SoftmaxHead, Cache::Nothing) => ops::LayerGrad {
                    input_grad: grad,
                    param_grads: Vec::new(),
                },
                _ => return Err(arg_err!("forward tape does not match the layer stack")),
            };
            grad = lg.input_grad;
            param_grads.push(lg.param_grads);
        }
        let params = param_grads.into_iter().rev().flatten().collect();
        Ok(Gradients { input: grad, params })
    }
}

fn info(layer: &str, param: &str, decay: bool) -> ParamInfo {
    ParamInfo {
        name: format!("{layer}.{param}"),
        decay,
    }
}

fn as3(shape: &[usize], what: &str) -> Result<[usize; 3]> {
    match *shape {
        [c, h, w] => Ok([c, h, w]),
        _ => Err(shape_err!("{what} layer needs a C×H×W input, got {shape:?}")),
    }
}

/// Anything that maps a batch of images to class probabilities and can
/// differentiate a class logit with respect to its input.
pub trait Classifier<T: Real = f32> {
    fn num_classes(&self) -> usize;

    /// C×H×W of one input image.
    fn input_shape(&self) -> [usize; 3];

    /// Infer-mode probabilities, one row per image of an N×C×H×W batch.
    fn predict_probs(&self, batch: &Tensor<T>) -> Result<Tensor<T>>;

    /// Gradient of the `class` logit with respect to each pixel of a single
    /// 1×C×H×W image (infer mode).
    fn logit_input_gradient(&self, image: &Tensor<T>, class: usize) -> Result<Tensor<T>>;
}

impl<T: Real> Classifier<T> for ModelGraph<T> {
    fn num_classes(&self) -> usize {
        ModelGraph::num_classes(self)
    }

    fn input_shape(&self) -> [usize; 3] {
        self.input_shape
    }

    fn predict_probs(&self, batch: &Tensor<T>) -> Result<Tensor<T>> {
        self.forward_probs(batch)
    }

    fn logit_input_gradient(&self, image: &Tensor<T>, class: usize) -> Result<Tensor<T>> {
        let fwd = self.forward_infer(image)?;
        let [n, k] = fwd.logits.dims2()?;
        if class >= k {
            return Err(arg_err!("class {class} out of range [0, {k})"));
        }
        let mut seed = Tensor::zeros(&[n, k]);
        for row in 0..n {
            seed.data_mut()[row * k + class] = T::one();
        }
        Ok(self.backward(&fwd, &seed)?.input)
    }
}
