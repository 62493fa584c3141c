use alloc::vec;
use alloc::vec::Vec;

use super::LayerGrad;
use crate::error::{shape_err, Result};
use crate::linalg::{gemm, Op};
use crate::{Real, Tensor};

fn check<T: Real>(input: &Tensor<T>, weights: &Tensor<T>) -> Result<[usize; 3]> {
    let [n, d] = input.dims2()?;
    let [wd, m] = weights.dims2()?;
    if d != wd {
        return Err(shape_err!("dense: input width {d} does not match weights {wd}×{m}"));
    }
    Ok([n, d, m])
}

/// `input (N×D) · weights (D×M) + bias`, bias broadcast over rows.
pub fn dense<T: Real>(input: &Tensor<T>, weights: &Tensor<T>, bias: &Tensor<T>) -> Result<Tensor<T>> {
    let [n, d, m] = check(input, weights)?;
    if bias.len() != m {
        return Err(shape_err!("dense: bias length {} does not match width {m}", bias.len()));
    }
    let mut out = Vec::with_capacity(n * m);
    for _ in 0..n {
        out.extend_from_slice(bias.data());
    }
    gemm(Op::N, Op::N, n, m, d, T::one(), input.data(), weights.data(), T::one(), &mut out);
    Tensor::new(&[n, m], out)
}

/// Gradients of [`dense`]; `param_grads` = `[d_weights, d_bias]`.
pub fn dense_backward<T: Real>(
    input: &Tensor<T>,
    weights: &Tensor<T>,
    upstream: &Tensor<T>,
) -> Result<LayerGrad<T>> {
    let [n, d, m] = check(input, weights)?;
    if upstream.shape() != [n, m] {
        return Err(shape_err!("dense backward: upstream {:?}, expected [{n}, {m}]", upstream.shape()));
    }
    let up = upstream.data();
    let mut d_in = vec![T::zero(); n * d];
    gemm(Op::N, Op::T, n, d, m, T::one(), up, weights.data(), T::zero(), &mut d_in);
    let mut d_w = vec![T::zero(); d * m];
    gemm(Op::T, Op::N, d, m, n, T::one(), input.data(), up, T::zero(), &mut d_w);
    let mut d_b = vec![T::zero(); m];
    for row in up.chunks_exact(m) {
        for (acc, &g) in d_b.iter_mut().zip(row) {
            *acc += g;
        }
    }
    Ok(LayerGrad {
        input_grad: Tensor::new(&[n, d], d_in)?,
        param_grads: Vec::from([Tensor::new(&[d, m], d_w)?, Tensor::new(&[m], d_b)?]),
    })
}
