//! Trainable layers with hand-written gradients.
//!
//! Just enough to build LeNet-5 with and without rotation layers: strided
//! cross-correlation, 2x2 pooling, ReLU, dense layers, softmax cross-entropy,
//! plain SGD and a binary checkpoint container.

mod checkpoint;
mod conv;
mod dense;
mod loss;
mod pool;

pub use checkpoint::{Checkpoint, ParamRecord, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use conv::{conv_backward, conv_forward, ConvGrads, ConvParams};
pub use dense::{dense_backward, dense_forward, DenseGrads, DenseParams};
pub use loss::{softmax, softmax_cross_entropy};
pub use pool::{avgpool2_backward, avgpool2_forward, maxpool2_backward, maxpool2_forward, relu_backward, relu_forward};

use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// `params -= lr * grads`, elementwise.
pub fn sgd_step<T: Scalar>(params: &mut [T], grads: &[T], lr: T) -> Result<()> {
    if params.len() != grads.len() {
        return Err(Error::Shape(format!("{} parameters, {} gradients", params.len(), grads.len())));
    }
    for (p, &g) in params.iter_mut().zip(grads) {
        *p = *p - lr * g;
    }
    Ok(())
}

/// Glorot-uniform draws in `+-sqrt(6 / (fan_in + fan_out))`.
pub(crate) fn glorot<T: Scalar, R: Rng>(rng: &mut R, count: usize, fan_in: usize, fan_out: usize) -> Vec<T> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    (0..count).map(|_| T::of(rng.gen_range(-limit..=limit))).collect()
}
