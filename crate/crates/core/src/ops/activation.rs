use alloc::vec::Vec;

use rand::Rng as _;

use super::{LayerGrad, Mode};
use crate::error::{arg_err, shape_err, Result};
use crate::{rng, Real, Tensor};

pub fn relu<T: Real>(input: &Tensor<T>) -> Tensor<T> {
    input.map(|x| if x > T::zero() { x } else { T::zero() })
}

/// Passes gradient only where the forward input was strictly positive.
pub fn relu_backward<T: Real>(input: &Tensor<T>, upstream: &Tensor<T>) -> Result<LayerGrad<T>> {
    if input.shape() != upstream.shape() {
        return Err(shape_err!("relu backward: {:?} vs {:?}", input.shape(), upstream.shape()));
    }
    let data = input
        .data()
        .iter()
        .zip(upstream.data())
        .map(|(&x, &g)| if x > T::zero() { g } else { T::zero() })
        .collect();
    Ok(LayerGrad::input_only(Tensor::new(input.shape(), data)?))
}

/// Per-element multipliers of an inverted-dropout pass: `0` or `1/(1−rate)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMask<T> {
    scale: Vec<T>,
}

impl<T: Real> DropoutMask<T> {
    pub fn multipliers(&self) -> &[T] {
        &self.scale
    }
}

/// Inverted dropout. Infer mode (or `rate == 0`) is the identity and yields
/// no mask.
pub fn dropout<T: Real>(
    input: &Tensor<T>,
    rate: f64,
    mode: Mode,
    seed: u64,
) -> Result<(Tensor<T>, Option<DropoutMask<T>>)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(arg_err!("dropout rate must be in [0, 1), got {rate}"));
    }
    if mode == Mode::Infer || rate == 0.0 {
        return Ok((input.clone(), None));
    }
    let keep = T::of(1.0 / (1.0 - rate));
    let mut r = rng::rng(seed);
    let scale: Vec<T> = (0..input.len())
        .map(|_| if r.random::<f64>() < rate { T::zero() } else { keep })
        .collect();
    let data = input.data().iter().zip(&scale).map(|(&x, &m)| x * m).collect();
    Ok((Tensor::new(input.shape(), data)?, Some(DropoutMask { scale })))
}

pub fn dropout_backward<T: Real>(mask: Option<&DropoutMask<T>>, upstream: &Tensor<T>) -> Result<LayerGrad<T>> {
    let Some(mask) = mask else {
        return Ok(LayerGrad::input_only(upstream.clone()));
    };
    if mask.scale.len() != upstream.len() {
        return Err(shape_err!("dropout backward: mask/upstream length mismatch"));
    }
    let data = upstream.data().iter().zip(&mask.scale).map(|(&g, &m)| g * m).collect();
    Ok(LayerGrad::input_only(Tensor::new(upstream.shape(), data)?))
}
