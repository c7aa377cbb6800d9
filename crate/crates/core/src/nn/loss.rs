use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Mean softmax cross-entropy over the batch and its gradient with respect to
/// the logits (`[N, 1, 1, K]`). Softmax is stabilized by subtracting the row
/// maximum.
pub fn softmax_cross_entropy<T: Scalar>(logits: &Tensor<T>, labels: &[usize]) -> Result<(T, Tensor<T>)> {
    let n = logits.batch();
    let k = logits.per_sample();
    if labels.len() != n {
        return Err(Error::Shape(format!("{} labels for a batch of {n}", labels.len())));
    }
    let mut grad = Tensor::zeros(logits.shape());
    let mut total = T::zero();
    let scale = T::one() / T::of(n as f64);
    for (i, &label) in labels.iter().enumerate() {
        if label >= k {
            return Err(Error::Label { label, classes: k });
        }
        let row = &logits.as_slice()[i * k..(i + 1) * k];
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let exps: Vec<T> = row.iter().map(|&v| (v - max).exp()).collect();
        let sum: T = exps.iter().copied().sum();
        total = total + (sum.ln() - (row[label] - max));
        let g = &mut grad.as_mut_slice()[i * k..(i + 1) * k];
        for (j, (gj, &e)) in g.iter_mut().zip(&exps).enumerate() {
            let p = e / sum;
            *gj = (if j == label { p - T::one() } else { p }) * scale;
        }
    }
    Ok((total * scale, grad))
}

/// Row-wise softmax probabilities.
pub fn softmax<T: Scalar>(logits: &Tensor<T>) -> Tensor<T> {
    let k = logits.per_sample();
    let mut out = logits.clone();
    for row in out.as_mut_slice().chunks_mut(k) {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        for v in row.iter_mut() {
            *v = (*v - max).exp();
        }
        let sum: T = row.iter().copied().sum();
        for v in row.iter_mut() {
            *v = *v / sum;
        }
    }
    out
}
