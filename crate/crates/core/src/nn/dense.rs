use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Fully connected layer on flattened `[N, 1, 1, inputs]` tensors. `weights`
/// is row-major `inputs x outputs`.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseParams<T> {
    pub weights: Vec<T>,
    pub bias: Vec<T>,
    pub inputs: usize,
    pub outputs: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DenseGrads<T> {
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> DenseParams<T> {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        DenseParams { weights: vec![T::zero(); inputs * outputs], bias: vec![T::zero(); outputs], inputs, outputs }
    }

    pub fn glorot<R: Rng>(rng: &mut R, inputs: usize, outputs: usize) -> Self {
        DenseParams {
            weights: super::glorot(rng, inputs * outputs, inputs, outputs),
            bias: vec![T::zero(); outputs],
            inputs,
            outputs,
        }
    }

    fn check(&self, x: &Tensor<T>) -> Result<()> {
        if x.per_sample() != self.inputs || x.height() != 1 || x.width() != 1 {
            return Err(Error::Shape(format!("dense layer expects [N, 1, 1, {}], got {:?}", self.inputs, x.shape())));
        }
        Ok(())
    }
}

pub fn dense_forward<T: Scalar>(x: &Tensor<T>, p: &DenseParams<T>) -> Result<Tensor<T>> {
    p.check(x)?;
    let mut out = Tensor::zeros([x.batch(), 1, 1, p.outputs]);
    for n in 0..x.batch() {
        let row = &x.as_slice()[n * p.inputs..(n + 1) * p.inputs];
        let acc = &mut out.as_mut_slice()[n * p.outputs..(n + 1) * p.outputs];
        for (i, &v) in row.iter().enumerate() {
            let w = &p.weights[i * p.outputs..(i + 1) * p.outputs];
            for (a, &wi) in acc.iter_mut().zip(w) {
                *a = *a + v * wi;
            }
        }
        for (a, &b) in acc.iter_mut().zip(&p.bias) {
            *a = *a + b;
        }
    }
    Ok(out)
}

pub fn dense_backward<T: Scalar>(x: &Tensor<T>, p: &DenseParams<T>, grad_out: &Tensor<T>) -> Result<(Tensor<T>, DenseGrads<T>)> {
    p.check(x)?;
    if grad_out.shape() != [x.batch(), 1, 1, p.outputs] {
        return Err(Error::Shape(format!("dense gradient {:?}, expected [{}, 1, 1, {}]", grad_out.shape(), x.batch(), p.outputs)));
    }
    let mut gx = Tensor::zeros(x.shape());
    let mut gw = vec![T::zero(); p.weights.len()];
    let mut gb = vec![T::zero(); p.outputs];
    for n in 0..x.batch() {
        let row = &x.as_slice()[n * p.inputs..(n + 1) * p.inputs];
        let go = &grad_out.as_slice()[n * p.outputs..(n + 1) * p.outputs];
        for (b, &g) in gb.iter_mut().zip(go) {
            *b = *b + g;
        }
        let gxr = &mut gx.as_mut_slice()[n * p.inputs..(n + 1) * p.inputs];
        for i in 0..p.inputs {
            let w = &p.weights[i * p.outputs..(i + 1) * p.outputs];
            let gwr = &mut gw[i * p.outputs..(i + 1) * p.outputs];
            let mut acc = T::zero();
            for o in 0..p.outputs {
                gwr[o] = gwr[o] + row[i] * go[o];
                acc = acc + w[o] * go[o];
            }
            gxr[i] = acc;
        }
    }
    Ok((gx, DenseGrads { weights: gw, bias: gb }))
}
