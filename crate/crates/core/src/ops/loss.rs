use alloc::vec::Vec;

use crate::error::{arg_err, Result};
use crate::{Real, Tensor};

#[derive(Debug, Clone)]
pub struct LossOutput<T> {
    pub loss: T,
    pub probs: Tensor<T>,
    pub logits_grad: Tensor<T>,
}

/// Row-wise softmax of an N×K logit matrix, max-subtracted.
pub fn softmax<T: Real>(logits: &Tensor<T>) -> Result<Tensor<T>> {
    let [_, k] = logits.dims2()?;
    let mut out = Vec::with_capacity(logits.len());
    for row in logits.data().chunks_exact(k) {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let start = out.len();
        out.extend(row.iter().map(|&z| (z - max).exp()));
        let total: T = out[start..].iter().copied().sum();
        out[start..].iter_mut().for_each(|p| *p /= total);
    }
    Tensor::new(logits.shape(), out)
}

/// Class-weighted softmax cross-entropy.
///
/// `loss = (1/N) Σᵢ w[yᵢ]·(−log pᵢ[yᵢ])`; `logits_grad` is its exact
/// gradient, `w[yᵢ]/N · (pᵢ − onehot(yᵢ))`.
pub fn softmax_cross_entropy<T: Real>(
    logits: &Tensor<T>,
    labels: &[usize],
    class_weights: &[T],
) -> Result<LossOutput<T>> {
    let [n, k] = logits.dims2()?;
    if labels.len() != n {
        return Err(arg_err!("{} labels for {n} logit rows", labels.len()));
    }
    if class_weights.len() != k {
        return Err(arg_err!("{} class weights for {k} classes", class_weights.len()));
    }
    if let Some(bad) = class_weights.iter().find(|w| !(**w > T::zero())) {
        return Err(arg_err!("class weights must be positive, got {bad}"));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= k) {
        return Err(arg_err!("label {bad} out of range [0, {k})"));
    }
    let probs = softmax(logits)?;
    let inv_n = T::one() / T::of(n as f64);
    let mut loss = T::zero();
    let mut grad = probs.data().to_vec();
    for (i, (row, &y)) in logits.data().chunks_exact(k).zip(labels).enumerate() {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let lse = max + row.iter().map(|&z| (z - max).exp()).sum::<T>().ln();
        let w = class_weights[y];
        loss += w * (lse - row[y]);
        let g = &mut grad[i * k..(i + 1) * k];
        g[y] -= T::one();
        g.iter_mut().for_each(|v| *v *= w * inv_n);
    }
    Ok(LossOutput {
        loss: loss * inv_n,
        probs,
        logits_grad: Tensor::new(&[n, k], grad)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits() {
        let z = Tensor::<f64>::full(&[3, 7], 0.3);
        let out = softmax_cross_entropy(&z, &[0, 3, 6], &[1.0; 7]).unwrap();
        assert!(out.probs.data().iter().all(|&p| (p - 1.0 / 7.0).abs() < 1e-12));
        assert!((out.loss - 7f64.ln()).abs() < 1e-12);
        assert!((out.loss - 1.9459).abs() < 1e-4);
    }

    #[test]
    fn large_margin_is_stable() {
        let mut z = Tensor::<f32>::zeros(&[1, 7]);
        z.data_mut()[2] = 1000.0;
        let out = softmax_cross_entropy(&z, &[2], &[1.0; 7]).unwrap();
        assert!(out.loss.is_finite() && out.loss < 1e-6);
        assert!(out.probs.all_finite() && out.logits_grad.all_finite());
    }

    #[test]
    fn label_out_of_range() {
        let z = Tensor::<f32>::zeros(&[1, 7]);
        assert!(matches!(softmax_cross_entropy(&z, &[7], &[1.0; 7]), Err(crate::Error::Argument(_))));
        assert!(softmax_cross_entropy(&z, &[0], &[0.0; 7]).is_err());
    }
}
