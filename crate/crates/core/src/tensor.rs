//! Dense `[batch, height, width, channels]` tensors.
//!
//! Everything in the crate uses this one axis order. Channels are innermost,
//! so a pixel's channel vector is contiguous and a window of `F x F` pixels
//! is `F` runs of `F * C` elements.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T> {
    shape: [usize; 4],
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn from_vec(shape: [usize; 4], data: Vec<T>) -> Result<Self> {
        if shape.iter().any(|&d| d == 0) {
            return Err(Error::Shape(format!("all dimensions must be >= 1, got {shape:?}")));
        }
        let expected: usize = shape.iter().product();
        if data.len() != expected {
            return Err(Error::Shape(format!(
                "shape {shape:?} needs {expected} elements, got {}",
                data.len()
            )));
        }
        Ok(Tensor { shape, data })
    }

    /// # Panics
    /// If any dimension is zero.
    pub fn zeros(shape: [usize; 4]) -> Self {
        Self::filled(shape, T::zero())
    }

    pub fn filled(shape: [usize; 4], value: T) -> Self {
        assert!(shape.iter().all(|&d| d > 0), "all dimensions must be >= 1, got {shape:?}");
        Tensor { shape, data: vec![value; shape.iter().product()] }
    }

    pub fn from_fn(shape: [usize; 4], mut f: impl FnMut([usize; 4]) -> T) -> Self {
        let mut t = Self::zeros(shape);
        let [n, h, w, c] = shape;
        let mut i = 0;
        for a in 0..n {
            for b in 0..h {
                for d in 0..w {
                    for e in 0..c {
                        t.data[i] = f([a, b, d, e]);
                        i += 1;
                    }
                }
            }
        }
        t
    }

    pub fn shape(&self) -> [usize; 4] {
        self.shape
    }

    pub fn batch(&self) -> usize {
        self.shape[0]
    }

    pub fn height(&self) -> usize {
        self.shape[1]
    }

    pub fn width(&self) -> usize {
        self.shape[2]
    }

    pub fn channels(&self) -> usize {
        self.shape[3]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn offset(&self, [n, h, w, c]: [usize; 4]) -> usize {
        ((n * self.shape[1] + h) * self.shape[2] + w) * self.shape[3] + c
    }

    pub fn get(&self, index: [usize; 4]) -> Result<T> {
        if index.iter().zip(self.shape.iter()).any(|(i, d)| i >= d) {
            return Err(Error::OutOfRange { index, shape: self.shape });
        }
        Ok(self.data[self.offset(index)])
    }

    /// Same data viewed under a new shape with the same element count.
    pub fn reshape(self, shape: [usize; 4]) -> Result<Self> {
        Tensor::from_vec(shape, self.data)
    }

    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor { shape: self.shape, data: self.data.iter().map(|&v| U::of(v.as_f64())).collect() }
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Tensor { shape: self.shape, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    /// One batch entry as a batch-of-one tensor.
    pub fn sample(&self, n: usize) -> Self {
        let per = self.per_sample();
        Tensor {
            shape: [1, self.shape[1], self.shape[2], self.shape[3]],
            data: self.data[n * per..(n + 1) * per].to_vec(),
        }
    }

    pub fn per_sample(&self) -> usize {
        self.shape[1] * self.shape[2] * self.shape[3]
    }

    /// Concatenates along the batch axis.
    pub fn stack(parts: &[Tensor<T>]) -> Result<Self> {
        let first = parts.first().ok_or_else(|| Error::Shape("cannot stack zero tensors".into()))?;
        let [_, h, w, c] = first.shape;
        let mut data = Vec::with_capacity(parts.iter().map(|p| p.len()).sum());
        let mut n = 0;
        for p in parts {
            if p.shape[1..] != first.shape[1..] {
                return Err(Error::Shape(format!(
                    "cannot stack {:?} with {:?}",
                    p.shape, first.shape
                )));
            }
            n += p.shape[0];
            data.extend_from_slice(&p.data);
        }
        Tensor::from_vec([n, h, w, c], data)
    }

    pub fn max_abs_diff(&self, other: &Tensor<T>) -> Result<f64> {
        if self.shape != other.shape {
            return Err(Error::Shape(format!("{:?} vs {:?}", self.shape, other.shape)));
        }
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a.as_f64() - b.as_f64()).abs())
            .fold(0.0, f64::max))
    }

    pub fn require_square(&self) -> Result<()> {
        if self.shape[1] != self.shape[2] {
            return Err(Error::NotSquare { height: self.shape[1], width: self.shape[2] });
        }
        Ok(())
    }

    /// Counterclockwise rotation by `turns * 90` degrees in the (H, W) plane.
    ///
    /// A single turn sends `(h, w)` to `(W - 1 - w, h)`; height and width swap
    /// for odd turn counts. Pure data movement.
    pub fn rot90(&self, turns: i64) -> Self {
        let turns = turns.rem_euclid(4);
        if turns == 0 {
            return self.clone();
        }
        let [n, h, w, c] = self.shape;
        let out_shape = if turns % 2 == 1 { [n, w, h, c] } else { self.shape };
        let mut out = Tensor::zeros(out_shape);
        for b in 0..n {
            for y in 0..h {
                for x in 0..w {
                    let (ny, nx) = match turns {
                        1 => (w - 1 - x, y),
                        2 => (h - 1 - y, w - 1 - x),
                        _ => (x, h - 1 - y),
                    };
                    let src = self.offset([b, y, x, 0]);
                    let dst = out.offset([b, ny, nx, 0]);
                    out.data[dst..dst + c].copy_from_slice(&self.data[src..src + c]);
                }
            }
        }
        out
    }

    /// Counterclockwise rotation by an arbitrary angle about the map center
    /// `((H-1)/2, (W-1)/2)` with bilinear resampling.
    ///
    /// Taps that land outside the source read `fill`. Multiples of 90 degrees
    /// use exact trigonometric values and therefore reproduce [`Tensor::rot90`]
    /// bit for bit.
    pub fn rotate_bilinear(&self, theta_degrees: f64, fill: T) -> Result<Self> {
        self.require_square()?;
        let (sin, cos) = exact_sin_cos(theta_degrees);
        let [n, h, w, c] = self.shape;
        let cy = (h as f64 - 1.0) / 2.0;
        let cx = (w as f64 - 1.0) / 2.0;
        let mut out = Tensor::zeros(self.shape);
        for y in 0..h {
            for x in 0..w {
                let u = x as f64 - cx;
                let v = y as f64 - cy;
                let sx = u * cos - v * sin + cx;
                let sy = u * sin + v * cos + cy;
                let x0 = sx.floor();
                let y0 = sy.floor();
                let fx = T::of(sx - x0);
                let fy = T::of(sy - y0);
                let (x0, y0) = (x0 as i64, y0 as i64);
                let one = T::one();
                let taps = [
                    (y0, x0, (one - fy) * (one - fx)),
                    (y0, x0 + 1, (one - fy) * fx),
                    (y0 + 1, x0, fy * (one - fx)),
                    (y0 + 1, x0 + 1, fy * fx),
                ];
                for b in 0..n {
                    for ch in 0..c {
                        let mut acc = T::zero();
                        for &(ty, tx, weight) in &taps {
                            let v = if ty >= 0 && tx >= 0 && (ty as usize) < h && (tx as usize) < w {
                                self.data[self.offset([b, ty as usize, tx as usize, ch])]
                            } else {
                                fill
                            };
                            acc = acc + weight * v;
                        }
                        let dst = out.offset([b, y, x, ch]);
                        out.data[dst] = acc;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Copies every sliding window of `grid` out of the map. Padding reads as
    /// zero.
    pub fn extract_windows(&self, grid: &WindowGrid) -> Result<Windows<T>> {
        grid.check_input(self)?;
        let [n, h, w, c] = self.shape;
        let f = grid.window;
        let per_window = f * f * c;
        let mut data = vec![T::zero(); n * grid.out_h * grid.out_w * per_window];
        let pad = grid.padding as isize;
        let mut i = 0;
        for b in 0..n {
            for oh in 0..grid.out_h {
                for ow in 0..grid.out_w {
                    let top = (oh * grid.stride) as isize - pad;
                    let left = (ow * grid.stride) as isize - pad;
                    for fh in 0..f as isize {
                        let y = top + fh;
                        for fw in 0..f as isize {
                            let x = left + fw;
                            if y >= 0 && x >= 0 && (y as usize) < h && (x as usize) < w {
                                let src = self.offset([b, y as usize, x as usize, 0]);
                                data[i..i + c].copy_from_slice(&self.data[src..src + c]);
                            }
                            i += c;
                        }
                    }
                }
            }
        }
        Ok(Windows { grid: *grid, batch: n, channels: c, data })
    }
}

impl<T: Scalar> Index<[usize; 4]> for Tensor<T> {
    type Output = T;

    fn index(&self, index: [usize; 4]) -> &T {
        match self.get(index) {
            Ok(_) => &self.data[self.offset(index)],
            Err(e) => panic!("{e}"),
        }
    }
}

impl<T: Scalar> IndexMut<[usize; 4]> for Tensor<T> {
    fn index_mut(&mut self, index: [usize; 4]) -> &mut T {
        if let Err(e) = self.get(index) {
            panic!("{e}");
        }
        let o = self.offset(index);
        &mut self.data[o]
    }
}

/// `(sin, cos)` of an angle in degrees, exact at multiples of 90.
fn exact_sin_cos(theta_degrees: f64) -> (f64, f64) {
    let reduced = theta_degrees.rem_euclid(360.0);
    if reduced == 0.0 {
        (0.0, 1.0)
    } else if reduced == 90.0 {
        (1.0, 0.0)
    } else if reduced == 180.0 {
        (0.0, -1.0)
    } else if reduced == 270.0 {
        (-1.0, 0.0)
    } else {
        reduced.to_radians().sin_cos()
    }
}

/// Geometry of a sliding-window pass over an `in_h x in_w` map.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WindowGrid {
    window: usize,
    stride: usize,
    padding: usize,
    in_h: usize,
    in_w: usize,
    out_h: usize,
    out_w: usize,
}

impl WindowGrid {
    /// Output counts are `(in + 2 * padding - window) / stride + 1`; the
    /// division must be exact on both axes.
    pub fn new(in_h: usize, in_w: usize, window: usize, stride: usize, padding: usize) -> Result<Self> {
        if window == 0 || stride == 0 {
            return Err(Error::Grid(format!("window {window} and stride {stride} must be >= 1")));
        }
        let axis = |len: usize, name: &str| -> Result<usize> {
            let padded = len + 2 * padding;
            if padded < window {
                return Err(Error::Grid(format!(
                    "{name} {len} with padding {padding} is smaller than window {window}"
                )));
            }
            if (padded - window) % stride != 0 {
                return Err(Error::Grid(format!(
                    "{name}: ({len} + 2*{padding} - {window}) is not divisible by stride {stride}"
                )));
            }
            Ok((padded - window) / stride + 1)
        };
        let out_h = axis(in_h, "height")?;
        let out_w = axis(in_w, "width")?;
        Ok(WindowGrid { window, stride, padding, in_h, in_w, out_h, out_w })
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn padding(&self) -> usize {
        self.padding
    }

    pub fn in_h(&self) -> usize {
        self.in_h
    }

    pub fn in_w(&self) -> usize {
        self.in_w
    }

    pub fn out_h(&self) -> usize {
        self.out_h
    }

    pub fn out_w(&self) -> usize {
        self.out_w
    }

    pub fn windows_per_sample(&self) -> usize {
        self.out_h * self.out_w
    }

    /// A grid on a square input with uniform stride and symmetric padding maps
    /// its set of windows onto itself under every quarter turn.
    pub fn is_quarter_turn_symmetric(&self) -> bool {
        self.in_h == self.in_w
    }

    pub fn require_quarter_turn_symmetric(&self) -> Result<()> {
        if !self.is_quarter_turn_symmetric() {
            return Err(Error::NotSquare { height: self.in_h, width: self.in_w });
        }
        Ok(())
    }

    pub(crate) fn check_input<T: Scalar>(&self, t: &Tensor<T>) -> Result<()> {
        if t.height() != self.in_h || t.width() != self.in_w {
            return Err(Error::Grid(format!(
                "grid built for {}x{} input, got {}x{}",
                self.in_h,
                self.in_w,
                t.height(),
                t.width()
            )));
        }
        Ok(())
    }
}

/// Windows copied out of a map, laid out `(n, oh, ow, fh, fw, c)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Windows<T> {
    grid: WindowGrid,
    batch: usize,
    channels: usize,
    data: Vec<T>,
}

impl<T: Scalar> Windows<T> {
    pub fn from_vec(grid: WindowGrid, batch: usize, channels: usize, data: Vec<T>) -> Result<Self> {
        let f = grid.window;
        let expected = batch * grid.out_h * grid.out_w * f * f * channels;
        if data.len() != expected || batch == 0 || channels == 0 {
            return Err(Error::Shape(format!(
                "{batch} x {}x{} windows of {f}x{f}x{channels} need {expected} elements, got {}",
                grid.out_h,
                grid.out_w,
                data.len()
            )));
        }
        Ok(Windows { grid, batch, channels, data })
    }

    pub fn grid(&self) -> &WindowGrid {
        &self.grid
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn window_len(&self) -> usize {
        self.grid.window * self.grid.window * self.channels
    }

    pub fn count(&self) -> usize {
        self.batch * self.grid.windows_per_sample()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn window(&self, n: usize, oh: usize, ow: usize) -> &[T] {
        let idx = (n * self.grid.out_h + oh) * self.grid.out_w + ow;
        let len = self.window_len();
        &self.data[idx * len..(idx + 1) * len]
    }

    pub fn window_mut(&mut self, n: usize, oh: usize, ow: usize) -> &mut [T] {
        let idx = (n * self.grid.out_h + oh) * self.grid.out_w + ow;
        let len = self.window_len();
        &mut self.data[idx * len..(idx + 1) * len]
    }

    /// Tiles the windows into a dense `(F * O_H) x (F * O_W)` map: window
    /// `(oh, ow)` covers rows `oh*F..(oh+1)*F` and columns `ow*F..(ow+1)*F`.
    pub fn assemble(&self) -> Tensor<T> {
        let f = self.grid.window;
        let c = self.channels;
        let (oh_n, ow_n) = (self.grid.out_h, self.grid.out_w);
        let mut out = Tensor::zeros([self.batch, f * oh_n, f * ow_n, c]);
        for b in 0..self.batch {
            for oh in 0..oh_n {
                for ow in 0..ow_n {
                    let win = self.window(b, oh, ow);
                    for fh in 0..f {
                        let dst = out.offset([b, oh * f + fh, ow * f, 0]);
                        out.data[dst..dst + f * c].copy_from_slice(&win[fh * f * c..(fh + 1) * f * c]);
                    }
                }
            }
        }
        out
    }

    /// Inverse of [`Windows::assemble`].
    pub fn from_tiled(tiled: &Tensor<T>, grid: WindowGrid) -> Result<Self> {
        let f = grid.window;
        if tiled.height() != f * grid.out_h || tiled.width() != f * grid.out_w {
            return Err(Error::Shape(format!(
                "tiled map {}x{} does not match {}x{} windows of size {f}",
                tiled.height(),
                tiled.width(),
                grid.out_h,
                grid.out_w
            )));
        }
        let mut w = Windows {
            grid,
            batch: tiled.batch(),
            channels: tiled.channels(),
            data: vec![T::zero(); tiled.len()],
        };
        let c = w.channels;
        for b in 0..w.batch {
            for oh in 0..grid.out_h {
                for ow in 0..grid.out_w {
                    let win = w.window_mut(b, oh, ow);
                    for fh in 0..f {
                        let src = tiled.offset([b, oh * f + fh, ow * f, 0]);
                        win[fh * f * c..(fh + 1) * f * c].copy_from_slice(&tiled.as_slice()[src..src + f * c]);
                    }
                }
            }
        }
        Ok(w)
    }

    /// Adjoint of extraction: adds every window element back onto the input
    /// position it was read from. Padding positions are dropped.
    pub fn scatter_add(&self) -> Tensor<T> {
        let g = &self.grid;
        let c = self.channels;
        let f = g.window;
        let mut out = Tensor::zeros([self.batch, g.in_h, g.in_w, c]);
        let pad = g.padding as isize;
        for b in 0..self.batch {
            for oh in 0..g.out_h {
                for ow in 0..g.out_w {
                    let win = self.window(b, oh, ow);
                    let top = (oh * g.stride) as isize - pad;
                    let left = (ow * g.stride) as isize - pad;
                    for fh in 0..f {
                        let y = top + fh as isize;
                        if y < 0 || y as usize >= g.in_h {
                            continue;
                        }
                        for fw in 0..f {
                            let x = left + fw as isize;
                            if x < 0 || x as usize >= g.in_w {
                                continue;
                            }
                            let dst = out.offset([b, y as usize, x as usize, 0]);
                            let src = (fh * f + fw) * c;
                            for ch in 0..c {
                                out.data[dst + ch] = out.data[dst + ch] + win[src + ch];
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

pub fn extract_windows<T: Scalar>(t: &Tensor<T>, grid: &WindowGrid) -> Result<Windows<T>> {
    t.extract_windows(grid)
}

pub fn assemble_windows<T: Scalar>(windows: &Windows<T>) -> Tensor<T> {
    windows.assemble()
}
