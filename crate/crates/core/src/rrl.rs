//! Regional rotation layer.
//!
//! [`rrl_forward`] canonicalizes every sliding window of a feature map and
//! tiles the results into a `(F * O_H) x (F * O_W)` map. A convolution with
//! stride `F` over that map takes exactly one dot product per canonical
//! window, which makes the pair equivariant to quarter turns of the input.
//!
//! [`global_rrl`] treats a whole (square) map as a single window and rotates
//! all channels together; placed before the classifier it converts the
//! equivariant features into invariant ones.
//!
//! The chosen rotations are recorded so the backward pass can route
//! gradients through the same permutations, treating the choice as constant.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::lbp::{lex_full, mean_plane, select_by, Canonicalizer, LbpMode, RotationTable, RING_ORDER};
use crate::scalar::{order_free_sum, Scalar};
use crate::tensor::{Tensor, WindowGrid, Windows};

/// How a multi-channel window picks its rotation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum ChannelPolicy {
    /// Each channel rotates by its own canonical rotation.
    #[default]
    Independent,
    /// One rotation, decided on the channel-mean plane, for all channels.
    Shared,
}

impl ChannelPolicy {
    pub fn name(self) -> &'static str {
        match self {
            ChannelPolicy::Independent => "independent",
            ChannelPolicy::Shared => "shared",
        }
    }
}

impl fmt::Display for ChannelPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ChannelPolicy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "independent" => Ok(ChannelPolicy::Independent),
            "shared" => Ok(ChannelPolicy::Shared),
            other => Err(format!("unknown channel policy `{other}` (expected independent or shared)")),
        }
    }
}

/// Rotation indices chosen by one forward pass, laid out
/// `(n, oh, ow, unit)` where a unit is a channel (independent) or the whole
/// window (shared).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RotationRecord {
    grid: WindowGrid,
    mode: LbpMode,
    policy: ChannelPolicy,
    batch: usize,
    channels: usize,
    rotations: Vec<u8>,
}

impl RotationRecord {
    pub fn grid(&self) -> &WindowGrid {
        &self.grid
    }

    pub fn mode(&self) -> LbpMode {
        self.mode
    }

    pub fn policy(&self) -> ChannelPolicy {
        self.policy
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn units_per_window(&self) -> usize {
        match self.policy {
            ChannelPolicy::Independent => self.channels,
            ChannelPolicy::Shared => 1,
        }
    }

    pub fn rotations(&self) -> &[u8] {
        &self.rotations
    }

    pub fn rotation(&self, n: usize, oh: usize, ow: usize, unit: usize) -> u8 {
        let g = &self.grid;
        self.rotations[((n * g.out_h() + oh) * g.out_w() + ow) * self.units_per_window() + unit]
    }

    fn table(&self) -> RotationTable {
        // validated when the record was produced; global records may carry an
        // even size
        RotationTable::build(self.mode, self.grid.window())
    }

    fn check_windows<T: Scalar>(&self, w: &Windows<T>) -> Result<()> {
        if w.batch() != self.batch || w.channels() != self.channels || w.grid() != &self.grid {
            return Err(Error::Record(format!(
                "record for batch {} x {} channels, got batch {} x {} channels",
                self.batch,
                self.channels,
                w.batch(),
                w.channels()
            )));
        }
        Ok(())
    }

    /// Applies the recorded rotations to `windows` (forward) or their
    /// transposes (backward).
    fn permute<T: Scalar>(&self, windows: &Windows<T>, transpose: bool) -> Result<Windows<T>> {
        self.check_windows(windows)?;
        let table = self.table();
        let c = self.channels;
        let g = self.grid;
        let mut out = windows.clone();
        for n in 0..self.batch {
            for oh in 0..g.out_h() {
                for ow in 0..g.out_w() {
                    let src = windows.window(n, oh, ow);
                    let dst = out.window_mut(n, oh, ow);
                    for ch in 0..c {
                        let unit = if self.policy == ChannelPolicy::Independent { ch } else { 0 };
                        let k = self.rotation(n, oh, ow, unit) as usize;
                        if transpose {
                            table.transpose_channel(k, src, c, ch, dst);
                        } else {
                            table.apply_channel(k, src, c, ch, dst);
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Canonicalizes every window of `x` and tiles them.
pub fn rrl_forward<T: Scalar>(
    x: &Tensor<T>,
    grid: &WindowGrid,
    mode: LbpMode,
    policy: ChannelPolicy,
) -> Result<(Tensor<T>, RotationRecord)> {
    x.require_square()?;
    grid.require_quarter_turn_symmetric()?;
    let canon = Canonicalizer::new(mode, grid.window())?;
    let mut windows = x.extract_windows(grid)?;
    let c = x.channels();
    let mut rotations = Vec::with_capacity(windows.count() * c);
    let mut scratch = vec![T::zero(); windows.window_len()];
    for n in 0..x.batch() {
        for oh in 0..grid.out_h() {
            for ow in 0..grid.out_w() {
                let win = windows.window_mut(n, oh, ow);
                canon.canonicalize(win, c, policy, &mut scratch, &mut rotations);
                win.copy_from_slice(&scratch);
            }
        }
    }
    let record = RotationRecord { grid: *grid, mode, policy, batch: x.batch(), channels: c, rotations };
    Ok((windows.assemble(), record))
}

/// Gradient of the layer with the recorded rotations held fixed: undo each
/// tile's rotation, then scatter-add windows back to input positions.
pub fn rrl_backward<T: Scalar>(grad_tiled: &Tensor<T>, record: &RotationRecord) -> Result<Tensor<T>> {
    let windows = Windows::from_tiled(grad_tiled, record.grid)
        .map_err(|e| Error::Record(format!("gradient does not match record: {e}")))?;
    Ok(record.permute(&windows, true)?.scatter_add())
}

/// The layer as a linear map with rotations frozen from an earlier pass.
pub fn rrl_apply_frozen<T: Scalar>(x: &Tensor<T>, record: &RotationRecord) -> Result<Tensor<T>> {
    let windows = x.extract_windows(&record.grid)?;
    Ok(record.permute(&windows, false)?.assemble())
}

/// Rotates each sample's whole map (all channels together) into canonical
/// orientation among its four quarter turns.
///
/// The deciding code comes from the 3x3 neighbourhood of the center cell of
/// the channel-mean plane when the side is odd, or from a 3x3 average-pooled
/// reduction of that plane when it is even. Maps smaller than 3x3 have no
/// neighbourhood and are decided by content alone.
pub fn global_rrl<T: Scalar>(x: &Tensor<T>) -> Result<(Tensor<T>, RotationRecord)> {
    x.require_square()?;
    let size = x.height();
    let c = x.channels();
    let grid = WindowGrid::new(size, size, size, 1, 0)?;
    let table = RotationTable::quarter_turns(size);
    let small = RotationTable::quarter_turns(3);
    let ring3 = RING_ORDER.map(|(dy, dx)| ((1 + dy) * 3 + 1 + dx) as usize);
    let mut out = x.clone();
    let mut rotations = Vec::with_capacity(x.batch());
    let per = x.per_sample();
    for n in 0..x.batch() {
        let map = &x.as_slice()[n * per..(n + 1) * per];
        let mean = mean_plane(map, size * size, c);
        let decider: Option<Vec<T>> = if size < 3 {
            None
        } else if size % 2 == 1 {
            let h = size / 2;
            Some((0..9).map(|i| mean[(h + i / 3 - 1) * size + h + i % 3 - 1]).collect())
        } else {
            Some(pool3(&mean, size))
        };
        let code = |k: usize| match &decider {
            None => 0,
            Some(p) => {
                let center = p[4];
                let mut code = 0u8;
                for (i, &cell) in ring3.iter().enumerate() {
                    if p[small.source(k, cell)] >= center {
                        code |= 1 << i;
                    }
                }
                code
            }
        };
        let k = select_by(4, code, |k, j| lex_full(&table, map, c, k, j));
        table.apply(k, map, c, &mut out.as_mut_slice()[n * per..(n + 1) * per]);
        rotations.push(k as u8);
    }
    let record = RotationRecord {
        grid,
        mode: LbpMode::Quarter4,
        policy: ChannelPolicy::Shared,
        batch: x.batch(),
        channels: c,
        rotations,
    };
    Ok((out, record))
}

/// Block edges of the 3x3 pooling used for even sides: outer blocks of equal
/// size, an even-sized middle block, so the layout is quarter-turn symmetric.
pub(crate) fn pool3_edges(size: usize) -> [usize; 4] {
    let middle = (2 * ((size as f64 / 6.0).round() as usize)).max(2);
    let outer = (size - middle) / 2;
    [0, outer, outer + middle, size]
}

/// 3x3 block means with order-independent summation, so pooling a rotated
/// plane gives exactly the rotated pooled plane.
fn pool3<T: Scalar>(plane: &[T], size: usize) -> Vec<T> {
    let e = pool3_edges(size);
    let mut out = Vec::with_capacity(9);
    let mut block = Vec::new();
    for by in 0..3 {
        for bx in 0..3 {
            block.clear();
            for y in e[by]..e[by + 1] {
                block.extend_from_slice(&plane[y * size + e[bx]..y * size + e[bx + 1]]);
            }
            let count = T::of(block.len() as f64);
            out.push(order_free_sum(&mut block) / count);
        }
    }
    out
}
