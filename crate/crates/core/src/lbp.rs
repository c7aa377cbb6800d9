//! Local binary pattern codes and canonical window orientation.
//!
//! A window's LBP code thresholds the 8 neighbours of its center cell against
//! the center value. Rotating the window permutes those neighbours, so every
//! candidate rotation yields a code; the canonical orientation is the one with
//! the smallest code. Ties are broken by the lexicographically smallest
//! rotated content, then by the smallest rotation index. Both criteria depend
//! only on the rotated content, so any two windows in the same rotation orbit
//! select the same canonical window.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::rrl::ChannelPolicy;
use crate::scalar::{total_cmp, Scalar};

/// Neighbour offsets `(dy, dx)` clockwise from the top-left corner. Bit `i`
/// of a code (weight `2^i`) belongs to position `i`.
pub const RING_ORDER: [(isize, isize); 8] =
    [(-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1)];

/// Which rotations a window may take.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LbpMode {
    /// 45-degree steps of the 3x3 ring; the center stays put. `F = 3` only.
    Ring8,
    /// Quarter turns of the whole `F x F` window, any odd `F >= 3`.
    Quarter4,
}

impl LbpMode {
    pub fn rotation_count(self) -> usize {
        match self {
            LbpMode::Ring8 => 8,
            LbpMode::Quarter4 => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LbpMode::Ring8 => "ring8",
            LbpMode::Quarter4 => "quarter4",
        }
    }

    pub fn check_window(self, size: usize) -> Result<()> {
        if size < 3 || size % 2 == 0 {
            return Err(Error::WindowSize(size));
        }
        if self == LbpMode::Ring8 && size != 3 {
            return Err(Error::ModeWindow { mode: self.name(), size });
        }
        Ok(())
    }
}

impl fmt::Display for LbpMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LbpMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "ring8" => Ok(LbpMode::Ring8),
            "quarter4" => Ok(LbpMode::Quarter4),
            other => Err(format!("unknown LBP mode `{other}` (expected ring8 or quarter4)")),
        }
    }
}

/// One candidate rotation: `index` clockwise steps of 45 (Ring8) or
/// 90 (Quarter4) degrees.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Rotation {
    pub mode: LbpMode,
    pub index: u8,
}

impl Rotation {
    pub fn clockwise_degrees(&self) -> u32 {
        let step = match self.mode {
            LbpMode::Ring8 => 45,
            LbpMode::Quarter4 => 90,
        };
        self.index as u32 * step
    }

    pub fn inverse(&self) -> Rotation {
        let k = self.mode.rotation_count() as u8;
        Rotation { mode: self.mode, index: (k - self.index % k) % k }
    }

    /// Rotated copy of an `size x size x channels` window.
    pub fn apply<T: Scalar>(&self, window: &[T], size: usize, channels: usize) -> Result<Vec<T>> {
        let table = RotationTable::new(self.mode, size)?;
        check_len(window, size, channels)?;
        let mut out = vec![T::zero(); window.len()];
        table.apply(self.index as usize, window, channels, &mut out);
        Ok(out)
    }
}

pub fn candidate_rotations(mode: LbpMode) -> Vec<Rotation> {
    (0..mode.rotation_count() as u8).map(|index| Rotation { mode, index }).collect()
}

fn check_len<T>(window: &[T], size: usize, channels: usize) -> Result<()> {
    if window.len() != size * size * channels {
        return Err(Error::Shape(format!(
            "window of {size}x{size}x{channels} needs {} values, got {}",
            size * size * channels,
            window.len()
        )));
    }
    Ok(())
}

/// LBP code of a single-channel `size x size` plane: bit `i` is set when the
/// neighbour at [`RING_ORDER`] position `i` is `>=` the center value.
pub fn lbp_code<T: Scalar>(plane: &[T], size: usize) -> Result<u8> {
    if size < 3 || size % 2 == 0 {
        return Err(Error::WindowSize(size));
    }
    check_len(plane, size, 1)?;
    let ring = ring_cells(size);
    let center = plane[center_cell(size)];
    Ok(code_from(|i| plane[ring[i]], center))
}

#[inline]
fn code_from<T: Scalar>(neighbour: impl Fn(usize) -> T, center: T) -> u8 {
    let mut code = 0u8;
    for i in 0..8 {
        if neighbour(i) >= center {
            code |= 1 << i;
        }
    }
    code
}

fn center_cell(size: usize) -> usize {
    (size / 2) * size + size / 2
}

fn ring_cells(size: usize) -> [usize; 8] {
    let c = (size / 2) as isize;
    RING_ORDER.map(|(dy, dx)| ((c + dy) * size as isize + c + dx) as usize)
}

/// Precomputed cell permutations for every candidate rotation of a window
/// size: `perm[k][dst] = src`, cells in row-major order.
#[derive(Clone, Debug)]
pub struct RotationTable {
    mode: LbpMode,
    size: usize,
    perms: Vec<Vec<usize>>,
}

impl RotationTable {
    pub fn new(mode: LbpMode, size: usize) -> Result<Self> {
        mode.check_window(size)?;
        Ok(Self::build(mode, size))
    }

    /// Quarter-turn table for any size, including even ones (used by the
    /// global layer, which rotates whole maps).
    pub(crate) fn quarter_turns(size: usize) -> Self {
        Self::build(LbpMode::Quarter4, size)
    }

    pub(crate) fn build(mode: LbpMode, size: usize) -> Self {
        let cells = size * size;
        let perms = match mode {
            LbpMode::Quarter4 => (0..4)
                .map(|k| {
                    (0..cells)
                        .map(|dst| {
                            let (mut y, mut x) = (dst / size, dst % size);
                            // undo k clockwise turns: a clockwise turn sends
                            // (y, x) to (x, size-1-y)
                            for _ in 0..k {
                                let (py, px) = (size - 1 - x, y);
                                y = py;
                                x = px;
                            }
                            y * size + x
                        })
                        .collect()
                })
                .collect(),
            LbpMode::Ring8 => {
                let ring = ring_cells(size);
                (0..8)
                    .map(|k| {
                        let mut p: Vec<usize> = (0..cells).collect();
                        for i in 0..8 {
                            p[ring[(i + k) % 8]] = ring[i];
                        }
                        p
                    })
                    .collect()
            }
        };
        RotationTable { mode, size, perms }
    }

    pub fn mode(&self) -> LbpMode {
        self.mode
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn rotation_count(&self) -> usize {
        self.perms.len()
    }

    #[inline]
    pub fn source(&self, k: usize, dst: usize) -> usize {
        self.perms[k][dst]
    }

    /// `out = rotation k of window`.
    pub fn apply<T: Scalar>(&self, k: usize, window: &[T], channels: usize, out: &mut [T]) {
        for (dst, &src) in self.perms[k].iter().enumerate() {
            out[dst * channels..(dst + 1) * channels]
                .copy_from_slice(&window[src * channels..(src + 1) * channels]);
        }
    }

    /// Rotates a single channel `ch` of `window` into the same channel of `out`.
    pub fn apply_channel<T: Scalar>(&self, k: usize, window: &[T], channels: usize, ch: usize, out: &mut [T]) {
        for (dst, &src) in self.perms[k].iter().enumerate() {
            out[dst * channels + ch] = window[src * channels + ch];
        }
    }

    /// Transpose of [`RotationTable::apply_channel`]: moves a gradient on the
    /// rotated window back to the unrotated cells.
    pub fn transpose_channel<T: Scalar>(&self, k: usize, grad: &[T], channels: usize, ch: usize, out: &mut [T]) {
        for (dst, &src) in self.perms[k].iter().enumerate() {
            out[src * channels + ch] = grad[dst * channels + ch];
        }
    }
}

/// Canonical window plus the rotation index chosen for each decision unit
/// (one per channel under `Independent`, one in total under `Shared`).
#[derive(Clone, Debug, PartialEq)]
pub struct Canonical<T> {
    pub window: Vec<T>,
    pub rotations: Vec<u8>,
}

/// Rotates an `size x size x channels` window into its canonical orientation.
pub fn canonical_rotation<T: Scalar>(
    window: &[T],
    size: usize,
    channels: usize,
    mode: LbpMode,
    policy: ChannelPolicy,
) -> Result<Canonical<T>> {
    let canon = Canonicalizer::new(mode, size)?;
    check_len(window, size, channels)?;
    let mut out = vec![T::zero(); window.len()];
    let mut rotations = Vec::new();
    canon.canonicalize(window, channels, policy, &mut out, &mut rotations);
    Ok(Canonical { window: out, rotations })
}

/// Reusable canonicalizer for one `(mode, size)` pair.
#[derive(Clone, Debug)]
pub struct Canonicalizer {
    table: RotationTable,
    ring: [usize; 8],
    center: usize,
}

impl Canonicalizer {
    pub fn new(mode: LbpMode, size: usize) -> Result<Self> {
        let table = RotationTable::new(mode, size)?;
        Ok(Canonicalizer { table, ring: ring_cells(size), center: center_cell(size) })
    }

    pub fn table(&self) -> &RotationTable {
        &self.table
    }

    /// Writes the canonical window into `out` and appends the chosen rotation
    /// indices to `rotations`.
    pub fn canonicalize<T: Scalar>(
        &self,
        window: &[T],
        channels: usize,
        policy: ChannelPolicy,
        out: &mut [T],
        rotations: &mut Vec<u8>,
    ) {
        let cells = self.table.size * self.table.size;
        match policy {
            ChannelPolicy::Independent => {
                for ch in 0..channels {
                    let k = self.select(
                        |cell| window[cell * channels + ch],
                        |k, j| {
                            let (pk, pj) = (&self.table.perms[k], &self.table.perms[j]);
                            (0..cells)
                                .map(|d| total_cmp(window[pk[d] * channels + ch], window[pj[d] * channels + ch]))
                                .find(|o| o.is_ne())
                                .unwrap_or(Ordering::Equal)
                        },
                    );
                    self.table.apply_channel(k, window, channels, ch, out);
                    rotations.push(k as u8);
                }
            }
            ChannelPolicy::Shared => {
                let mean = mean_plane(window, cells, channels);
                let k = self.select(|cell| mean[cell], |k, j| lex_full(&self.table, window, channels, k, j));
                self.table.apply(k, window, channels, out);
                rotations.push(k as u8);
            }
        }
    }

    /// Hierarchical selection: minimal code, then minimal rotated content,
    /// then minimal index.
    fn select<T: Scalar>(&self, plane: impl Fn(usize) -> T, lex: impl Fn(usize, usize) -> Ordering) -> usize {
        let center = plane(self.center);
        let perms = &self.table.perms;
        let code = |k: usize| code_from(|i| plane(perms[k][self.ring[i]]), center);
        select_by(perms.len(), code, lex)
    }
}

/// Picks the candidate with the smallest code, ties resolved by `lex`, then by
/// index.
pub(crate) fn select_by(count: usize, code: impl Fn(usize) -> u8, lex: impl Fn(usize, usize) -> Ordering) -> usize {
    let mut best = 0;
    let mut best_code = code(0);
    for k in 1..count {
        let c = code(k);
        if c < best_code || (c == best_code && lex(k, best) == Ordering::Less) {
            best = k;
            best_code = c;
        }
    }
    best
}

/// Lexicographic comparison of rotations `k` and `j` of a full multi-channel
/// window, flattened `(h, w, c)`.
pub(crate) fn lex_full<T: Scalar>(table: &RotationTable, window: &[T], channels: usize, k: usize, j: usize) -> Ordering {
    let (pk, pj) = (&table.perms[k], &table.perms[j]);
    for d in 0..pk.len() {
        let (a, b) = (pk[d] * channels, pj[d] * channels);
        for ch in 0..channels {
            let o = total_cmp(window[a + ch], window[b + ch]);
            if o.is_ne() {
                return o;
            }
        }
    }
    Ordering::Equal
}

/// Per-cell channel mean, summed in channel order.
pub(crate) fn mean_plane<T: Scalar>(window: &[T], cells: usize, channels: usize) -> Vec<T> {
    let inv = T::of(channels as f64);
    (0..cells)
        .map(|cell| window[cell * channels..(cell + 1) * channels].iter().fold(T::zero(), |a, &v| a + v) / inv)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rot90_window(w: &[f64], size: usize, channels: usize, n: i64) -> Vec<f64> {
        Tensor::from_vec([1, size, size, channels], w.to_vec()).unwrap().rot90(n).into_vec()
    }

    /// Window from ring values (RING_ORDER positions) and a center.
    fn from_ring(ring: [f64; 8], center: f64) -> Vec<f64> {
        let mut w = vec![0.0; 9];
        w[4] = center;
        for (i, (dy, dx)) in RING_ORDER.iter().enumerate() {
            w[((1 + dy) * 3 + 1 + dx) as usize] = ring[i];
        }
        w
    }

    #[test]
    fn constant_window_code_is_255() {
        assert_eq!(lbp_code(&[0.5; 9], 3).unwrap(), 255);
        assert_eq!(lbp_code(&[2.0f32; 25], 5).unwrap(), 255);
    }

    #[test]
    fn dominant_center_code_is_0() {
        let mut w = [0.0; 9];
        w[4] = 1.0;
        assert_eq!(lbp_code(&w, 3).unwrap(), 0);
    }

    #[test]
    fn top_left_only_is_bit_0() {
        let w = from_ring([5.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0], 5.0);
        assert_eq!(lbp_code(&w, 3).unwrap(), 1);
    }

    #[test]
    fn even_window_rejected() {
        assert!(matches!(lbp_code(&[0.0; 16], 4), Err(Error::WindowSize(4))));
        assert!(lbp_code(&[0.0; 1], 1).is_err());
    }

    #[test]
    fn mode_window_legality() {
        assert!(LbpMode::Ring8.check_window(3).is_ok());
        assert!(LbpMode::Ring8.check_window(5).is_err());
        assert!(LbpMode::Quarter4.check_window(5).is_ok());
        assert!(LbpMode::Quarter4.check_window(4).is_err());
        assert!(canonical_rotation(&[0.0; 25], 5, 1, LbpMode::Ring8, ChannelPolicy::Independent).is_err());
    }

    #[test]
    fn quarter4_candidates() {
        let c = candidate_rotations(LbpMode::Quarter4);
        assert_eq!(c.len(), 4);
        let w: Vec<f64> = (0..25).map(|v| v as f64).collect();
        assert_eq!(c[0].apply(&w, 5, 1).unwrap(), w);
        // index 1 is one clockwise quarter turn
        assert_eq!(c[1].apply(&w, 5, 1).unwrap(), rot90_window(&w, 5, 1, -1));
    }

    #[test]
    fn ring8_shift_two_is_clockwise_quarter_turn() {
        let w: Vec<f64> = (0..18).map(|v| (v * 7 % 11) as f64).collect();
        let r = Rotation { mode: LbpMode::Ring8, index: 2 };
        assert_eq!(r.apply(&w, 3, 2).unwrap(), rot90_window(&w, 3, 2, -1));
    }

    #[test]
    fn ring8_inverse_pairs() {
        let w: Vec<f64> = (0..9).map(|v| v as f64).collect();
        for r in candidate_rotations(LbpMode::Ring8) {
            let there = r.apply(&w, 3, 1).unwrap();
            assert_eq!(r.inverse().apply(&there, 3, 1).unwrap(), w);
            assert_eq!(r.inverse().index, (8 - r.index) % 8);
        }
    }

    #[test]
    fn ring8_single_step_moves_ring_clockwise() {
        let w = from_ring([1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0], 0.0);
        let r = Rotation { mode: LbpMode::Ring8, index: 1 }.apply(&w, 3, 1).unwrap();
        assert_eq!(r, from_ring([8.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0], 0.0));
    }

    #[test]
    fn minimum_reached_by_135_degrees_clockwise() {
        // center 6; neighbours >= 6 at ring positions 0, 5 and 6 give code 97.
        // Shifting by 3 (135 degrees) moves them to positions 3, 0, 1: code 11,
        // the unique minimum over all 8 shifts.
        let w = from_ring([7.0, 2.0, 1.0, 3.0, 5.0, 9.0, 8.0, 4.0], 6.0);
        assert_eq!(lbp_code(&w, 3).unwrap(), 97);
        let c = canonical_rotation(&w, 3, 1, LbpMode::Ring8, ChannelPolicy::Independent).unwrap();
        assert_eq!(c.rotations, vec![3]);
        let shifted = Rotation { mode: LbpMode::Ring8, index: 3 }.apply(&w, 3, 1).unwrap();
        assert_eq!(c.window, shifted);
        assert_eq!(lbp_code(&c.window, 3).unwrap(), 11);
    }

    #[test]
    fn constant_window_is_fixed() {
        for mode in [LbpMode::Ring8, LbpMode::Quarter4] {
            let c = canonical_rotation(&[0.25; 18], 3, 2, mode, ChannelPolicy::Independent).unwrap();
            assert_eq!(c.rotations, vec![0, 0]);
            assert_eq!(c.window, vec![0.25; 18]);
        }
    }

    #[test]
    fn symmetric_pattern_ties_use_content() {
        // all neighbours above the center: every rotation has code 255, the
        // smallest-index rule alone would not be rotation invariant
        let w = from_ring([3.0, 9.0, 4.0, 8.0, 5.0, 7.0, 6.0, 2.0], 1.0);
        let a = canonical_rotation(&w, 3, 1, LbpMode::Quarter4, ChannelPolicy::Independent).unwrap();
        for n in 1..4 {
            let b = canonical_rotation(&rot90_window(&w, 3, 1, n), 3, 1, LbpMode::Quarter4, ChannelPolicy::Independent)
                .unwrap();
            assert_eq!(a.window, b.window);
        }
    }

    /// Independent reference: rotate with Tensor::rot90 / explicit ring
    /// shifts, compute codes from scratch, sort candidates by
    /// (code, content, index).
    fn oracle(w: &[f64], size: usize, mode: LbpMode) -> (Vec<f64>, u8) {
        let code = |p: &[f64]| {
            let c = p[(size / 2) * size + size / 2];
            let mut v = 0u32;
            for (i, (dy, dx)) in RING_ORDER.iter().enumerate() {
                let y = (size / 2) as isize + dy;
                let x = (size / 2) as isize + dx;
                if p[(y * size as isize + x) as usize] >= c {
                    v += 1 << i;
                }
            }
            v
        };
        let mut cands: Vec<(u32, Vec<f64>, u8)> = match mode {
            LbpMode::Quarter4 => (0..4).map(|k| rot90_window(w, size, 1, -(k as i64))).enumerate()
                .map(|(k, p)| (code(&p), p, k as u8)).collect(),
            LbpMode::Ring8 => {
                let ring: Vec<f64> = RING_ORDER.iter().map(|(dy, dx)| w[((1 + dy) * 3 + 1 + dx) as usize]).collect();
                (0..8u8)
                    .map(|k| {
                        let mut r = [0.0; 8];
                        for i in 0..8 {
                            r[(i + k as usize) % 8] = ring[i];
                        }
                        let p = from_ring(r, w[4]);
                        (code(&p), p, k)
                    })
                    .collect()
            }
        };
        cands.sort_by(|a, b| {
            a.0.cmp(&b.0)
                .then_with(|| a.1.iter().zip(&b.1).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(Ordering::Equal))
                .then(a.2.cmp(&b.2))
        });
        let (_, p, k) = cands.swap_remove(0);
        (p, k)
    }

    #[test]
    fn ten_thousand_windows_match_oracle_and_are_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for (mode, size) in [(LbpMode::Ring8, 3), (LbpMode::Quarter4, 3), (LbpMode::Quarter4, 5)] {
            for trial in 0..10_000 {
                // every other trial draws from a handful of levels to force ties
                let w: Vec<f64> = (0..size * size)
                    .map(|_| if trial % 2 == 0 { rng.gen_range(-1.0..1.0) } else { rng.gen_range(0..3) as f64 })
                    .collect();
                let got = canonical_rotation(&w, size, 1, mode, ChannelPolicy::Independent).unwrap();
                let (want, k) = oracle(&w, size, mode);
                assert_eq!(got.window, want);
                assert_eq!(got.rotations, vec![k]);
                for n in 1..4 {
                    let r = rot90_window(&w, size, 1, n);
                    let other = canonical_rotation(&r, size, 1, mode, ChannelPolicy::Independent).unwrap();
                    assert_eq!(other.window, got.window, "mode {mode} trial {trial} n {n}");
                }
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn window(size: usize, channels: usize) -> impl Strategy<Value = Vec<f64>> {
            prop::collection::vec(prop_oneof![-2.0f64..2.0, (0i32..3).prop_map(f64::from)], size * size * channels)
        }

        fn mode_and_size() -> impl Strategy<Value = (LbpMode, usize)> {
            prop_oneof![Just((LbpMode::Ring8, 3)), Just((LbpMode::Quarter4, 3)), Just((LbpMode::Quarter4, 5))]
        }

        fn policy() -> impl Strategy<Value = ChannelPolicy> {
            prop_oneof![Just(ChannelPolicy::Independent), Just(ChannelPolicy::Shared)]
        }

        proptest! {
            #[test]
            fn quarter_turn_closure(((mode, size), w) in mode_and_size().prop_flat_map(|ms| (Just(ms), window(ms.1, 2))),
                                    policy in policy(), n in 1i64..4) {
                let a = canonical_rotation(&w, size, 2, mode, policy).unwrap();
                let b = canonical_rotation(&rot90_window(&w, size, 2, n), size, 2, mode, policy).unwrap();
                prop_assert_eq!(a.window, b.window);
            }

            #[test]
            fn idempotent(((mode, size), w) in mode_and_size().prop_flat_map(|ms| (Just(ms), window(ms.1, 2))),
                          policy in policy()) {
                let a = canonical_rotation(&w, size, 2, mode, policy).unwrap();
                let b = canonical_rotation(&a.window, size, 2, mode, policy).unwrap();
                prop_assert!(b.rotations.iter().all(|&k| k == 0));
                prop_assert_eq!(b.window, a.window);
            }

            #[test]
            fn canonical_code_is_minimal(((mode, size), w) in mode_and_size().prop_flat_map(|ms| (Just(ms), window(ms.1, 1)))) {
                let a = canonical_rotation(&w, size, 1, mode, ChannelPolicy::Independent).unwrap();
                let best = lbp_code(&a.window, size).unwrap();
                for r in candidate_rotations(mode) {
                    prop_assert!(best <= lbp_code(&r.apply(&w, size, 1).unwrap(), size).unwrap());
                }
            }

            #[test]
            fn canonical_is_a_permutation(((mode, size), w) in mode_and_size().prop_flat_map(|ms| (Just(ms), window(ms.1, 3))),
                                          policy in policy()) {
                let a = canonical_rotation(&w, size, 3, mode, policy).unwrap();
                let mut x = w.clone();
                let mut y = a.window.clone();
                x.sort_by(f64::total_cmp);
                y.sort_by(f64::total_cmp);
                prop_assert_eq!(x, y);
            }
        }
    }
}
