use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{LayerGrad, Mode};
use crate::error::{shape_err, Result};
use crate::{Real, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatchNormConfig {
    /// Weight of the old running statistic: `new = momentum·old + (1−momentum)·batch`.
    pub momentum: f64,
    pub epsilon: f64,
}

impl Default for BatchNormConfig {
    fn default() -> Self {
        Self {
            momentum: 0.9,
            epsilon: 1e-5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunningStats<T> {
    pub mean: Tensor<T>,
    pub var: Tensor<T>,
}

impl<T: Real> RunningStats<T> {
    pub fn new(channels: usize) -> Self {
        Self {
            mean: Tensor::zeros(&[channels]),
            var: Tensor::full(&[channels], T::one()),
        }
    }
}

/// Values saved by [`batchnorm`] for the backward pass.
#[derive(Debug, Clone)]
pub struct BatchNormCache<T> {
    mode: Mode,
    shape: Vec<usize>,
    xhat: Vec<T>,
    inv_std: Vec<T>,
}

/// Splits a tensor into (batch, channels, spatial) for per-channel statistics.
/// Works for N×C×H×W activations and N×D dense activations.
fn layout<T: Real>(input: &Tensor<T>) -> Result<(usize, usize, usize)> {
    let s = input.shape();
    if s.len() < 2 {
        return Err(shape_err!("batchnorm needs at least 2 dimensions, got {s:?}"));
    }
    Ok((s[0], s[1], s[2..].iter().product()))
}

/// Per-channel batch normalization followed by `gamma·x̂ + beta`.
///
/// Train mode normalizes with the biased batch statistics and folds them into
/// `running`; infer mode normalizes with `running` and leaves it untouched.
pub fn batchnorm<T: Real>(
    input: &Tensor<T>,
    gamma: &Tensor<T>,
    beta: &Tensor<T>,
    mode: Mode,
    running: &mut RunningStats<T>,
    config: BatchNormConfig,
) -> Result<(Tensor<T>, BatchNormCache<T>)> {
    let (n, c, s) = layout(input)?;
    for (name, t) in [
        ("gamma", gamma),
        ("beta", beta),
        ("running mean", &running.mean),
        ("running var", &running.var),
    ] {
        if t.len() != c {
            return Err(shape_err!("batchnorm: {name} has {} entries for {c} channels", t.len()));
        }
    }
    let x = input.data();
    let eps = T::of(config.epsilon);
    let count = T::of((n * s) as f64);
    let (mean, var): (Vec<T>, Vec<T>) = match mode {
        Mode::Train => (0..c)
            .map(|ch| {
                let plane = |b: usize| &x[(b * c + ch) * s..(b * c + ch + 1) * s];
                let mean = (0..n).map(|b| plane(b).iter().copied().sum::<T>()).sum::<T>() / count;
                let var = (0..n)
                    .map(|b| plane(b).iter().map(|&v| (v - mean) * (v - mean)).sum::<T>())
                    .sum::<T>()
                    / count;
                (mean, var)
            })
            .unzip(),
        Mode::Infer => (running.mean.data().to_vec(), running.var.data().to_vec()),
    };
    let inv_std: Vec<T> = var.iter().map(|&v| T::one() / (v + eps).sqrt()).collect();
    let mut xhat = vec![T::zero(); x.len()];
    let mut out = vec![T::zero(); x.len()];
    for b in 0..n {
        for ch in 0..c {
            let (g, bt, m, is) = (gamma.data()[ch], beta.data()[ch], mean[ch], inv_std[ch]);
            let range = (b * c + ch) * s..(b * c + ch + 1) * s;
            for i in range {
                let h = (x[i] - m) * is;
                xhat[i] = h;
                out[i] = g * h + bt;
            }
        }
    }
    if mode == Mode::Train {
        let keep = T::of(config.momentum);
        let take = T::one() - keep;
        for ch in 0..c {
            let rm = &mut running.mean.data_mut()[ch];
            *rm = keep * *rm + take * mean[ch];
            let rv = &mut running.var.data_mut()[ch];
            *rv = keep * *rv + take * var[ch];
        }
    }
    let cache = BatchNormCache {
        mode,
        shape: input.shape().to_vec(),
        xhat,
        inv_std,
    };
    Ok((Tensor::new(input.shape(), out)?, cache))
}

/// Gradients of [`batchnorm`]; `param_grads` = `[d_gamma, d_beta]`.
pub fn batchnorm_backward<T: Real>(
    cache: &BatchNormCache<T>,
    gamma: &Tensor<T>,
    upstream: &Tensor<T>,
) -> Result<LayerGrad<T>> {
    if upstream.shape() != cache.shape.as_slice() {
        return Err(shape_err!(
            "batchnorm backward: upstream {:?}, expected {:?}",
            upstream.shape(),
            cache.shape
        ));
    }
    let (n, c, s) = layout(upstream)?;
    let dy = upstream.data();
    let count = T::of((n * s) as f64);
    let mut d_gamma = vec![T::zero(); c];
    let mut d_beta = vec![T::zero(); c];
    for b in 0..n {
        for ch in 0..c {
            let range = (b * c + ch) * s..(b * c + ch + 1) * s;
            for i in range {
                d_gamma[ch] += dy[i] * cache.xhat[i];
                d_beta[ch] += dy[i];
            }
        }
    }
    let mut dx = vec![T::zero(); dy.len()];
    for b in 0..n {
        for ch in 0..c {
            let g = gamma.data()[ch];
            let is = cache.inv_std[ch];
            let range = (b * c + ch) * s..(b * c + ch + 1) * s;
            match cache.mode {
                Mode::Infer => {
                    for i in range {
                        dx[i] = dy[i] * g * is;
                    }
                }
                Mode::Train => {
                    // dx = γ·σ⁻¹/M · (M·dy − Σdy − x̂·Σ(dy·x̂))
                    let k = g * is / count;
                    let (sum_dy, sum_dyx) = (d_beta[ch], d_gamma[ch]);
                    for i in range {
                        dx[i] = k * (count * dy[i] - sum_dy - cache.xhat[i] * sum_dyx);
                    }
                }
            }
        }
    }
    Ok(LayerGrad {
        input_grad: Tensor::new(&cache.shape, dx)?,
        param_grads: Vec::from([Tensor::new(&[c], d_gamma)?, Tensor::new(&[c], d_beta)?]),
    })
}
