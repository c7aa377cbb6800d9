//! 2x2 stride-2 pooling and ReLU.

use crate::error::{Error, Result};
use crate::scalar::{order_free_sum, Scalar};
use crate::tensor::Tensor;

fn pooled_shape<T: Scalar>(x: &Tensor<T>) -> Result<[usize; 4]> {
    let [n, h, w, c] = x.shape();
    if h % 2 != 0 || w % 2 != 0 {
        return Err(Error::Shape(format!("2x2 pooling needs even height and width, got {h}x{w}")));
    }
    Ok([n, h / 2, w / 2, c])
}

/// Block offsets of output `(n, oy, ox, c)`, row-major within the block.
fn block<T: Scalar>(x: &Tensor<T>, n: usize, oy: usize, ox: usize, c: usize) -> [usize; 4] {
    [
        x.offset([n, 2 * oy, 2 * ox, c]),
        x.offset([n, 2 * oy, 2 * ox + 1, c]),
        x.offset([n, 2 * oy + 1, 2 * ox, c]),
        x.offset([n, 2 * oy + 1, 2 * ox + 1, c]),
    ]
}

/// Max pooling. Also returns, per output element, the input offset that won
/// (first in row-major block order on ties).
pub fn maxpool2_forward<T: Scalar>(x: &Tensor<T>) -> Result<(Tensor<T>, Vec<usize>)> {
    let shape = pooled_shape(x)?;
    let mut out = Tensor::zeros(shape);
    let mut argmax = Vec::with_capacity(out.len());
    let xs = x.as_slice();
    let mut o = 0;
    for n in 0..shape[0] {
        for oy in 0..shape[1] {
            for ox in 0..shape[2] {
                for c in 0..shape[3] {
                    let b = block(x, n, oy, ox, c);
                    let mut best = b[0];
                    for &i in &b[1..] {
                        if xs[i] > xs[best] {
                            best = i;
                        }
                    }
                    out.as_mut_slice()[o] = xs[best];
                    argmax.push(best);
                    o += 1;
                }
            }
        }
    }
    Ok((out, argmax))
}

pub fn maxpool2_backward<T: Scalar>(grad_out: &Tensor<T>, argmax: &[usize], input_shape: [usize; 4]) -> Result<Tensor<T>> {
    if argmax.len() != grad_out.len() {
        return Err(Error::Shape(format!("{} argmax entries for {} gradients", argmax.len(), grad_out.len())));
    }
    let mut gx = Tensor::zeros(input_shape);
    let gs = gx.as_mut_slice();
    for (&i, &g) in argmax.iter().zip(grad_out.as_slice()) {
        gs[i] = gs[i] + g;
    }
    Ok(gx)
}

/// Average pooling. Each block is summed in sorted order, so the result does
/// not depend on how the block is oriented.
pub fn avgpool2_forward<T: Scalar>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let shape = pooled_shape(x)?;
    let mut out = Tensor::zeros(shape);
    let xs = x.as_slice();
    let four = T::of(4.0);
    let mut o = 0;
    for n in 0..shape[0] {
        for oy in 0..shape[1] {
            for ox in 0..shape[2] {
                for c in 0..shape[3] {
                    let mut vals = block(x, n, oy, ox, c).map(|i| xs[i]);
                    out.as_mut_slice()[o] = order_free_sum(&mut vals) / four;
                    o += 1;
                }
            }
        }
    }
    Ok(out)
}

pub fn avgpool2_backward<T: Scalar>(grad_out: &Tensor<T>, input_shape: [usize; 4]) -> Result<Tensor<T>> {
    let mut gx = Tensor::zeros(input_shape);
    let expected = [input_shape[0], input_shape[1] / 2, input_shape[2] / 2, input_shape[3]];
    if grad_out.shape() != expected || input_shape[1] % 2 != 0 || input_shape[2] % 2 != 0 {
        return Err(Error::Shape(format!("avgpool gradient {:?} for input {:?}", grad_out.shape(), input_shape)));
    }
    let quarter = T::of(0.25);
    let mut o = 0;
    for n in 0..expected[0] {
        for oy in 0..expected[1] {
            for ox in 0..expected[2] {
                for c in 0..expected[3] {
                    let g = grad_out.as_slice()[o] * quarter;
                    o += 1;
                    for i in block(&gx, n, oy, ox, c) {
                        gx.as_mut_slice()[i] = g;
                    }
                }
            }
        }
    }
    Ok(gx)
}

pub fn relu_forward<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| if v > T::zero() { v } else { T::zero() })
}

/// Gradient passes where the forward input was strictly positive.
pub fn relu_backward<T: Scalar>(x: &Tensor<T>, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
    if x.shape() != grad_out.shape() {
        return Err(Error::Shape(format!("relu gradient {:?} for input {:?}", grad_out.shape(), x.shape())));
    }
    let data = x
        .as_slice()
        .iter()
        .zip(grad_out.as_slice())
        .map(|(&v, &g)| if v > T::zero() { g } else { T::zero() })
        .collect();
    Tensor::from_vec(x.shape(), data)
}
