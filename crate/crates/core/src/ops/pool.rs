use alloc::vec::Vec;

use super::LayerGrad;
use crate::error::{arg_err, shape_err, Result};
use crate::{Real, Tensor};

/// Output extent of an unpadded pooling window sweep.
///
/// With `ceil_mode` a trailing partial window is kept as long as it starts
/// inside the input.
pub fn pool_output_size(input: usize, kernel: usize, stride: usize, ceil_mode: bool) -> Result<usize> {
    if kernel == 0 || stride == 0 {
        return Err(arg_err!("maxpool kernel and stride must be positive"));
    }
    if kernel > input {
        return Err(shape_err!("maxpool kernel {kernel} larger than input extent {input}"));
    }
    let span = input - kernel;
    let mut out = if ceil_mode { span.div_ceil(stride) } else { span / stride } + 1;
    if ceil_mode && (out - 1) * stride >= input {
        out -= 1;
    }
    Ok(out)
}

pub fn maxpool2d<T: Real>(
    input: &Tensor<T>,
    kernel: usize,
    stride: usize,
    ceil_mode: bool,
) -> Result<Tensor<T>> {
    maxpool2d_with_indices(input, kernel, stride, ceil_mode).map(|(out, _)| out)
}

/// Max-pooling that also returns, for every output element, the flat input
/// index of its window maximum (first occurrence in row-major order on ties).
pub fn maxpool2d_with_indices<T: Real>(
    input: &Tensor<T>,
    kernel: usize,
    stride: usize,
    ceil_mode: bool,
) -> Result<(Tensor<T>, Vec<usize>)> {
    let [n, c, h, w] = input.dims4()?;
    let oh = pool_output_size(h, kernel, stride, ceil_mode)?;
    let ow = pool_output_size(w, kernel, stride, ceil_mode)?;
    let x = input.data();
    let mut out = Vec::with_capacity(n * c * oh * ow);
    let mut idx = Vec::with_capacity(n * c * oh * ow);
    for plane in 0..n * c {
        let base = plane * h * w;
        for oy in 0..oh {
            let y0 = oy * stride;
            let y1 = (y0 + kernel).min(h);
            for ox in 0..ow {
                let x0 = ox * stride;
                let x1 = (x0 + kernel).min(w);
                let mut best = base + y0 * w + x0;
                for y in y0..y1 {
                    for xx in x0..x1 {
                        let i = base + y * w + xx;
                        // strict comparison keeps the first maximum
                        if x[i] > x[best] {
                            best = i;
                        }
                    }
                }
                out.push(x[best]);
                idx.push(best);
            }
        }
    }
    Ok((Tensor::new(&[n, c, oh, ow], out)?, idx))
}

/// Routes each upstream gradient entry to the argmax position it came from.
pub fn maxpool2d_backward<T: Real>(
    input_shape: &[usize],
    argmax: &[usize],
    upstream: &Tensor<T>,
) -> Result<LayerGrad<T>> {
    if argmax.len() != upstream.len() {
        return Err(shape_err!(
            "maxpool backward: {} indices for {} upstream values",
            argmax.len(),
            upstream.len()
        ));
    }
    let mut grad = Tensor::zeros(input_shape);
    let g = grad.data_mut();
    for (&i, &u) in argmax.iter().zip(upstream.data()) {
        if i >= g.len() {
            return Err(shape_err!("maxpool backward: index {i} out of range"));
        }
        g[i] += u;
    }
    Ok(LayerGrad::input_only(grad))
}
