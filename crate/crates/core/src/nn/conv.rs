use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{Tensor, WindowGrid};

/// Cross-correlation weights. `kernels` is `[C_out, F, F, C_in]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvParams<T> {
    pub kernels: Tensor<T>,
    pub bias: Vec<T>,
    pub stride: usize,
    pub padding: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvGrads<T> {
    pub kernels: Tensor<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> ConvParams<T> {
    pub fn zeros(size: usize, in_channels: usize, out_channels: usize, stride: usize, padding: usize) -> Self {
        ConvParams {
            kernels: Tensor::zeros([out_channels, size, size, in_channels]),
            bias: vec![T::zero(); out_channels],
            stride,
            padding,
        }
    }

    pub fn glorot<R: Rng>(
        rng: &mut R,
        size: usize,
        in_channels: usize,
        out_channels: usize,
        stride: usize,
        padding: usize,
    ) -> Self {
        let shape = [out_channels, size, size, in_channels];
        let values = super::glorot(rng, shape.iter().product(), size * size * in_channels, size * size * out_channels);
        ConvParams {
            kernels: Tensor::from_vec(shape, values).expect("shape matches"),
            bias: vec![T::zero(); out_channels],
            stride,
            padding,
        }
    }

    pub fn size(&self) -> usize {
        self.kernels.height()
    }

    pub fn in_channels(&self) -> usize {
        self.kernels.channels()
    }

    pub fn out_channels(&self) -> usize {
        self.kernels.batch()
    }

    fn grid(&self, x: &Tensor<T>) -> Result<WindowGrid> {
        if x.channels() != self.in_channels() {
            return Err(Error::Shape(format!(
                "conv expects {} input channels, got {}",
                self.in_channels(),
                x.channels()
            )));
        }
        if self.bias.len() != self.out_channels() {
            return Err(Error::Shape(format!("{} biases for {} kernels", self.bias.len(), self.out_channels())));
        }
        WindowGrid::new(x.height(), x.width(), self.size(), self.stride, self.padding)
    }
}

/// Copies the receptive field of `(n, oy, ox)` into `patch`, zero outside the
/// map, laid out `(fh, fw, c)`.
fn gather<T: Scalar>(x: &Tensor<T>, g: &WindowGrid, n: usize, oy: usize, ox: usize, patch: &mut [T]) {
    let f = g.window();
    let c = x.channels();
    let top = (oy * g.stride()) as isize - g.padding() as isize;
    let left = (ox * g.stride()) as isize - g.padding() as isize;
    for fh in 0..f {
        let y = top + fh as isize;
        for fw in 0..f {
            let xx = left + fw as isize;
            let dst = &mut patch[(fh * f + fw) * c..(fh * f + fw + 1) * c];
            if y >= 0 && xx >= 0 && (y as usize) < x.height() && (xx as usize) < x.width() {
                let src = x.offset([n, y as usize, xx as usize, 0]);
                dst.copy_from_slice(&x.as_slice()[src..src + c]);
            } else {
                dst.fill(T::zero());
            }
        }
    }
}

/// Strided cross-correlation (no kernel flip) plus bias. Each dot product
/// accumulates over `fh`, then `fw`, then input channel, in that fixed order.
pub fn conv_forward<T: Scalar>(x: &Tensor<T>, p: &ConvParams<T>) -> Result<Tensor<T>> {
    let g = p.grid(x)?;
    let cout = p.out_channels();
    let klen = p.kernels.per_sample();
    let k = p.kernels.as_slice();
    let mut out = Tensor::zeros([x.batch(), g.out_h(), g.out_w(), cout]);
    let mut patch = vec![T::zero(); klen];
    let mut o = 0;
    for n in 0..x.batch() {
        for oy in 0..g.out_h() {
            for ox in 0..g.out_w() {
                gather(x, &g, n, oy, ox, &mut patch);
                for co in 0..cout {
                    let kern = &k[co * klen..(co + 1) * klen];
                    let mut acc = T::zero();
                    for (&a, &b) in patch.iter().zip(kern) {
                        acc = acc + a * b;
                    }
                    out.as_mut_slice()[o] = acc + p.bias[co];
                    o += 1;
                }
            }
        }
    }
    Ok(out)
}

pub fn conv_backward<T: Scalar>(x: &Tensor<T>, p: &ConvParams<T>, grad_out: &Tensor<T>) -> Result<(Tensor<T>, ConvGrads<T>)> {
    let g = p.grid(x)?;
    let cout = p.out_channels();
    if grad_out.shape() != [x.batch(), g.out_h(), g.out_w(), cout] {
        return Err(Error::Shape(format!(
            "conv gradient {:?}, expected {:?}",
            grad_out.shape(),
            [x.batch(), g.out_h(), g.out_w(), cout]
        )));
    }
    let klen = p.kernels.per_sample();
    let k = p.kernels.as_slice();
    let f = g.window();
    let c = x.channels();
    let mut gx = Tensor::zeros(x.shape());
    let mut gk = vec![T::zero(); k.len()];
    let mut gb = vec![T::zero(); cout];
    let mut patch = vec![T::zero(); klen];
    let mut gpatch = vec![T::zero(); klen];
    let go = grad_out.as_slice();
    let mut o = 0;
    for n in 0..x.batch() {
        for oy in 0..g.out_h() {
            for ox in 0..g.out_w() {
                gather(x, &g, n, oy, ox, &mut patch);
                gpatch.fill(T::zero());
                for co in 0..cout {
                    let d = go[o];
                    o += 1;
                    if d == T::zero() {
                        continue;
                    }
                    gb[co] = gb[co] + d;
                    let kern = &k[co * klen..(co + 1) * klen];
                    let gkern = &mut gk[co * klen..(co + 1) * klen];
                    for i in 0..klen {
                        gkern[i] = gkern[i] + patch[i] * d;
                        gpatch[i] = gpatch[i] + kern[i] * d;
                    }
                }
                let top = (oy * g.stride()) as isize - g.padding() as isize;
                let left = (ox * g.stride()) as isize - g.padding() as isize;
                for fh in 0..f {
                    let y = top + fh as isize;
                    if y < 0 || y as usize >= x.height() {
                        continue;
                    }
                    for fw in 0..f {
                        let xx = left + fw as isize;
                        if xx < 0 || xx as usize >= x.width() {
                            continue;
                        }
                        let dst = gx.offset([n, y as usize, xx as usize, 0]);
                        let src = (fh * f + fw) * c;
                        let gxs = gx.as_mut_slice();
                        for ch in 0..c {
                            gxs[dst + ch] = gxs[dst + ch] + gpatch[src + ch];
                        }
                    }
                }
            }
        }
    }
    let grads = ConvGrads { kernels: Tensor::from_vec(p.kernels.shape(), gk)?, bias: gb };
    Ok((gx, grads))
}
