use alloc::vec;
use alloc::vec::Vec;

use super::{LayerGrad, Padding};
use crate::error::{arg_err, shape_err, Result};
use crate::linalg::{gemm, Op};
use crate::{Real, Tensor};

/// Output extent and leading pad for one spatial axis.
pub fn conv_output_size(
    input: usize,
    kernel: usize,
    stride: usize,
    padding: Padding,
) -> Result<(usize, usize)> {
    if stride == 0 || kernel == 0 {
        return Err(arg_err!("kernel and stride must be positive"));
    }
    match padding {
        Padding::Valid => {
            if kernel > input {
                return Err(shape_err!("kernel {kernel} larger than input extent {input}"));
            }
            Ok(((input - kernel) / stride + 1, 0))
        }
        Padding::Same => {
            let out = input.div_ceil(stride);
            let total = ((out - 1) * stride + kernel).saturating_sub(input);
            Ok((out, total / 2))
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Geometry {
    batch: usize,
    in_c: usize,
    in_h: usize,
    in_w: usize,
    out_c: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    pad_top: usize,
    pad_left: usize,
    out_h: usize,
    out_w: usize,
}

impl Geometry {
    fn new<T: Real>(
        input: &Tensor<T>,
        weights: &Tensor<T>,
        padding: Padding,
        stride: usize,
    ) -> Result<Self> {
        let [batch, in_c, in_h, in_w] = input.dims4()?;
        let [out_c, w_in_c, kh, kw] = weights.dims4()?;
        if w_in_c != in_c {
            return Err(shape_err!(
                "conv2d: input has {in_c} channels but weights expect {w_in_c}"
            ));
        }
        let (out_h, pad_top) = conv_output_size(in_h, kh, stride, padding)?;
        let (out_w, pad_left) = conv_output_size(in_w, kw, stride, padding)?;
        Ok(Self {
            batch,
            in_c,
            in_h,
            in_w,
            out_c,
            kh,
            kw,
            stride,
            pad_top,
            pad_left,
            out_h,
            out_w,
        })
    }

    fn patch_len(&self) -> usize {
        self.in_c * self.kh * self.kw
    }

    fn positions(&self) -> usize {
        self.out_h * self.out_w
    }

    /// Calls `f(row, out_index, in_index)` for every in-bounds tap of the
    /// unrolled patch matrix (rows = c·kh·kw, columns = output positions).
    #[inline]
    fn for_each_tap(&self, mut f: impl FnMut(usize, usize, usize)) {
        let p = self.positions();
        for c in 0..self.in_c {
            for i in 0..self.kh {
                for j in 0..self.kw {
                    let row = (c * self.kh + i) * self.kw + j;
                    for oy in 0..self.out_h {
                        let y = (oy * self.stride + i) as isize - self.pad_top as isize;
                        if y < 0 || y >= self.in_h as isize {
                            continue;
                        }
                        let in_row = (c * self.in_h + y as usize) * self.in_w;
                        for ox in 0..self.out_w {
                            let x = (ox * self.stride + j) as isize - self.pad_left as isize;
                            if x < 0 || x >= self.in_w as isize {
                                continue;
                            }
                            f(row * p + oy * self.out_w + ox, row, in_row + x as usize);
                        }
                    }
                }
            }
        }
    }

    fn im2col<T: Real>(&self, image: &[T], cols: &mut [T]) {
        cols.fill(T::zero());
        self.for_each_tap(|dst, _, src| cols[dst] = image[src]);
    }

    fn col2im<T: Real>(&self, cols: &[T], image: &mut [T]) {
        self.for_each_tap(|src, _, dst| image[dst] += cols[src]);
    }
}

fn check_bias<T: Real>(bias: &Tensor<T>, out_c: usize) -> Result<()> {
    if bias.len() != out_c || bias.rank() != 1 {
        return Err(shape_err!(
            "conv2d: bias shape {:?} does not match {out_c} filters",
            bias.shape()
        ));
    }
    Ok(())
}

/// Cross-correlation of an N×C×H×W batch with OutC×C×KH×KW filters.
pub fn conv2d<T: Real>(
    input: &Tensor<T>,
    weights: &Tensor<T>,
    bias: &Tensor<T>,
    padding: Padding,
    stride: usize,
) -> Result<Tensor<T>> {
    let g = Geometry::new(input, weights, padding, stride)?;
    check_bias(bias, g.out_c)?;
    let (k, p) = (g.patch_len(), g.positions());
    let in_len = g.in_c * g.in_h * g.in_w;
    let out_len = g.out_c * p;
    let mut out = vec![T::zero(); g.batch * out_len];
    let mut cols = vec![T::zero(); k * p];
    for n in 0..g.batch {
        let dst = &mut out[n * out_len..(n + 1) * out_len];
        for (oc, plane) in dst.chunks_exact_mut(p).enumerate() {
            plane.fill(bias.data()[oc]);
        }
        g.im2col(&input.data()[n * in_len..(n + 1) * in_len], &mut cols);
        gemm(Op::N, Op::N, g.out_c, p, k, T::one(), weights.data(), &cols, T::one(), dst);
    }
    Tensor::new(&[g.batch, g.out_c, g.out_h, g.out_w], out)
}

/// Gradients of [`conv2d`]; `param_grads` = `[d_weights, d_bias]`.
pub fn conv2d_backward<T: Real>(
    input: &Tensor<T>,
    weights: &Tensor<T>,
    padding: Padding,
    stride: usize,
    upstream: &Tensor<T>,
) -> Result<LayerGrad<T>> {
    let g = Geometry::new(input, weights, padding, stride)?;
    let expected = [g.batch, g.out_c, g.out_h, g.out_w];
    if upstream.shape() != expected {
        return Err(shape_err!(
            "conv2d backward: upstream {:?}, expected {expected:?}",
            upstream.shape()
        ));
    }
    let (k, p) = (g.patch_len(), g.positions());
    let in_len = g.in_c * g.in_h * g.in_w;
    let out_len = g.out_c * p;
    let mut d_w = vec![T::zero(); g.out_c * k];
    let mut d_b = vec![T::zero(); g.out_c];
    let mut d_in = vec![T::zero(); input.len()];
    let mut cols = vec![T::zero(); k * p];
    let mut d_cols = vec![T::zero(); k * p];
    for n in 0..g.batch {
        let up = &upstream.data()[n * out_len..(n + 1) * out_len];
        for (oc, plane) in up.chunks_exact(p).enumerate() {
            d_b[oc] += plane.iter().copied().sum::<T>();
        }
        g.im2col(&input.data()[n * in_len..(n + 1) * in_len], &mut cols);
        // dW += dY · colsᵀ
        gemm(Op::N, Op::T, g.out_c, k, p, T::one(), up, &cols, T::one(), &mut d_w);
        // dcols = Wᵀ · dY
        gemm(Op::T, Op::N, k, p, g.out_c, T::one(), weights.data(), up, T::zero(), &mut d_cols);
        g.col2im(&d_cols, &mut d_in[n * in_len..(n + 1) * in_len]);
    }
    Ok(LayerGrad {
        input_grad: Tensor::new(input.shape(), d_in)?,
        param_grads: Vec::from([
            Tensor::new(weights.shape(), d_w)?,
            Tensor::new(&[g.out_c], d_b)?,
        ]),
    })
}
