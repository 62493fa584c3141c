//! Forward and backward passes for the fixed layer set.
//!
//! Every op is a pure function of its inputs (plus an explicit seed for
//! dropout). Backward functions take whatever the forward pass needs to be
//! replayed and return exact gradients as a [`LayerGrad`].

mod activation;
mod batchnorm;
mod conv;
mod dense;
mod loss;
mod pool;

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::Tensor;

pub use activation::{dropout, dropout_backward, relu, relu_backward, DropoutMask};
pub use batchnorm::{batchnorm, batchnorm_backward, BatchNormCache, BatchNormConfig, RunningStats};
pub use conv::{conv2d, conv2d_backward, conv_output_size};
pub use dense::{dense, dense_backward};
pub use loss::{softmax, softmax_cross_entropy, LossOutput};
pub use pool::{maxpool2d, maxpool2d_backward, maxpool2d_with_indices, pool_output_size};

/// Whether stochastic/batch-statistic layers behave as in training or serving.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Train,
    Infer,
}

/// Spatial padding for convolutions.
///
/// `Same` pads so the output is `ceil(input / stride)`; when the total pad is
/// odd the extra row/column goes on the bottom/right.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Padding {
    Same,
    Valid,
}

/// Gradients produced by one layer's backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad<T> {
    /// Same shape as the forward input.
    pub input_grad: Tensor<T>,
    /// One per learnable parameter, same shapes as the parameters.
    pub param_grads: Vec<Tensor<T>>,
}

impl<T> LayerGrad<T> {
    pub(crate) fn input_only(input_grad: Tensor<T>) -> Self {
        Self {
            input_grad,
            param_grads: Vec::new(),
        }
    }
}
