use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::invariance_tolerance;
use crate::error::Result;
use crate::lbp::{canonical_rotation, lbp_code, LbpMode, RING_ORDER};
use crate::models::Network;
use crate::nn::{conv_forward, ConvParams};
use crate::rrl::{rrl_forward, ChannelPolicy};
use crate::scalar::{total_cmp, Scalar};
use crate::tensor::{Tensor, WindowGrid};

#[derive(Clone, Debug, PartialEq)]
pub struct WindowReport {
    pub mode: LbpMode,
    pub size: usize,
    pub trials: usize,
    /// Rotated copies compared against the original's canonical form.
    pub checks: usize,
    pub failures: usize,
    /// Trials whose canonical form differs from the brute-force oracle.
    pub oracle_mismatches: usize,
    /// Trials drawn from the tie-heavy generators.
    pub tie_trials: usize,
    /// Largest element-wise difference seen; must be exactly zero.
    pub worst: f64,
}

impl WindowReport {
    pub fn passed(&self) -> bool {
        self.failures == 0 && self.oracle_mismatches == 0 && self.worst == 0.0
    }
}

/// `k` clockwise 45-degree ring steps of a 3x3 window, built straight from
/// the ring order. Used only as an oracle.
fn ring_shift(w: &[f64], channels: usize, k: usize) -> Vec<f64> {
    let cell = |(dy, dx): (isize, isize)| ((1 + dy) * 3 + 1 + dx) as usize;
    let mut out = w.to_vec();
    for i in 0..8 {
        let (src, dst) = (cell(RING_ORDER[i]), cell(RING_ORDER[(i + k) % 8]));
        out[dst * channels..(dst + 1) * channels].copy_from_slice(&w[src * channels..(src + 1) * channels]);
    }
    out
}

/// All rotated copies of a window, built without the library's rotation
/// tables: ring shifts for Ring8, `Tensor::rot90` for Quarter4 (index `j`
/// is `j` clockwise turns).
fn oracle_rotations(w: &[f64], size: usize, channels: usize, mode: LbpMode) -> Vec<Vec<f64>> {
    match mode {
        LbpMode::Ring8 => (0..8).map(|k| ring_shift(w, channels, k)).collect(),
        LbpMode::Quarter4 => {
            let t = Tensor::from_vec([1, size, size, channels], w.to_vec()).expect("window shape");
            (0..4).map(|j| t.rot90(-(j as i64)).into_vec()).collect()
        }
    }
}

fn lex(a: &[f64], b: &[f64]) -> Ordering {
    a.iter().zip(b).map(|(&x, &y)| total_cmp(x, y)).find(|o| o.is_ne()).unwrap_or(Ordering::Equal)
}

/// Brute-force canonical form: among all rotated copies, smallest LBP code
/// of the deciding plane, then lexicographically smallest content.
fn oracle_canonical(w: &[f64], size: usize, channels: usize, mode: LbpMode, policy: ChannelPolicy) -> Vec<f64> {
    let cells = size * size;
    let pick = |candidates: Vec<(u8, Vec<f64>)>| {
        candidates.into_iter().min_by(|a, b| a.0.cmp(&b.0).then_with(|| lex(&a.1, &b.1))).expect("rotations").1
    };
    match policy {
        ChannelPolicy::Shared => {
            let candidates = oracle_rotations(w, size, channels, mode)
                .into_iter()
                .map(|r| {
                    let mean: Vec<f64> = (0..cells)
                        .map(|c| r[c * channels..(c + 1) * channels].iter().fold(0.0, |a, &v| a + v) / channels as f64)
                        .collect();
                    (lbp_code(&mean, size).expect("odd window"), r)
                })
                .collect();
            pick(candidates)
        }
        ChannelPolicy::Independent => {
            let mut out = vec![0.0; w.len()];
            for ch in 0..channels {
                let plane: Vec<f64> = (0..cells).map(|c| w[c * channels + ch]).collect();
                let candidates = oracle_rotations(&plane, size, 1, mode)
                    .into_iter()
                    .map(|r| (lbp_code(&r, size).expect("odd window"), r))
                    .collect();
                for (c, v) in pick(candidates).into_iter().enumerate() {
                    out[c * channels + ch] = v;
                }
            }
            out
        }
    }
}

/// Window generators, cycled by trial index. Kinds 1, 3 and 4 are built to
/// produce exact ties.
fn random_window(kind: usize, size: usize, channels: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let len = size * size * channels;
    match kind {
        0 => (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        1 => (0..len).map(|_| rng.gen_range(0..3) as f64).collect(),
        2 => vec![rng.gen_range(-1.0..1.0); len],
        3 => {
            // every value a copy of the center or one step away from it
            let c: f64 = rng.gen_range(-1.0..1.0);
            (0..len).map(|_| c + [0.0, 0.0, -0.25, 0.25][rng.gen_range(0..4)]).collect()
        }
        _ => {
            // binary pattern with 2- or 4-fold rotational symmetry
            let base: Vec<f64> = (0..len).map(|_| rng.gen_range(0..2) as f64).collect();
            let t = Tensor::from_vec([1, size, size, channels], base).expect("window shape");
            let turns = if rng.gen_bool(0.5) { 1 } else { 2 };
            let mut sym = t.clone();
            for _ in 0..(4 / turns - 1).max(1) {
                let r = sym.rot90(turns as i64);
                sym = Tensor::from_vec(sym.shape(), sym.as_slice().iter().zip(r.as_slice()).map(|(a, b)| a.max(*b)).collect())
                    .expect("same shape");
            }
            sym.into_vec()
        }
    }
}

/// Random windows of every generator kind, both channel policies and 1-3
/// channels. For each trial the canonical form of every rotated copy must
/// equal the canonical form of the original element for element, and the
/// original's canonical form must equal the brute-force oracle.
pub fn verify_window_invariance(trials: usize, size: usize, mode: LbpMode, seed: u64) -> Result<WindowReport> {
    mode.check_window(size)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report =
        WindowReport { mode, size, trials, checks: 0, failures: 0, oracle_mismatches: 0, tie_trials: 0, worst: 0.0 };
    for t in 0..trials {
        let kind = t % 5;
        if kind != 0 {
            report.tie_trials += 1;
        }
        let policy = if (t / 5) % 2 == 0 { ChannelPolicy::Independent } else { ChannelPolicy::Shared };
        let channels = rng.gen_range(1..=3);
        let w = random_window(kind, size, channels, &mut rng);
        let base = canonical_rotation(&w, size, channels, mode, policy)?.window;
        if base != oracle_canonical(&w, size, channels, mode, policy) {
            report.oracle_mismatches += 1;
        }
        for r in oracle_rotations(&w, size, channels, mode).into_iter().skip(1) {
            let c = canonical_rotation(&r, size, channels, mode, policy)?.window;
            let diff = c.iter().zip(&base).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            report.checks += 1;
            if c != base {
                report.failures += 1;
                report.worst = report.worst.max(if diff == 0.0 { f64::MIN_POSITIVE } else { diff });
            }
        }
    }
    Ok(report)
}

/// What stands in front of the convolution in the layer suite.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LayerUnderTest {
    Rrl,
    /// Windows tiled without rotating them; must fail the suite.
    Identity,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerReport {
    pub trials: usize,
    pub checks: usize,
    pub failures: usize,
    pub worst: f64,
    pub tolerance: f64,
}

impl LayerReport {
    pub fn passed(&self) -> bool {
        self.failures == 0 && self.worst <= self.tolerance
    }
}

/// Convolution over RRL-tiled windows, checked for
/// `conv(R(rot90(x, n))) == rot90(conv(R(x)), n)` with random maps, kernels
/// and grids in 64-bit. Trials cycle over Ring8 F=3, Quarter4 F=3 and
/// Quarter4 F=5, each with both channel policies.
pub fn verify_layer_equivariance(trials: usize, seed: u64, under_test: LayerUnderTest) -> Result<LayerReport> {
    let cases = [
        (LbpMode::Ring8, 3, ChannelPolicy::Independent),
        (LbpMode::Ring8, 3, ChannelPolicy::Shared),
        (LbpMode::Quarter4, 3, ChannelPolicy::Independent),
        (LbpMode::Quarter4, 3, ChannelPolicy::Shared),
        (LbpMode::Quarter4, 5, ChannelPolicy::Independent),
        (LbpMode::Quarter4, 5, ChannelPolicy::Shared),
    ];
    let tolerance = invariance_tolerance(64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = LayerReport { trials, checks: 0, failures: 0, worst: 0.0, tolerance };
    for t in 0..trials {
        let (mode, f, policy) = cases[t % cases.len()];
        let stride = rng.gen_range(1..=2);
        let padding = rng.gen_range(0..=f / 2);
        let out = rng.gen_range(2..=5);
        let size = (out - 1) * stride + f - 2 * padding;
        let channels = rng.gen_range(1..=3);
        let grid = WindowGrid::new(size, size, f, stride, padding)?;
        let x = Tensor::<f64>::from_fn([1, size, size, channels], |_| rng.gen_range(-1.0..1.0));
        let out_channels = rng.gen_range(1..=3);
        let conv = ConvParams::<f64>::glorot(&mut rng, f, channels, out_channels, f, 0);
        let layer = |x: &Tensor<f64>| -> Result<Tensor<f64>> {
            let tiled = match under_test {
                LayerUnderTest::Rrl => rrl_forward(x, &grid, mode, policy)?.0,
                LayerUnderTest::Identity => x.extract_windows(&grid)?.assemble(),
            };
            conv_forward(&tiled, &conv)
        };
        let y = layer(&x)?;
        for n in 1..4 {
            let d = layer(&x.rot90(n))?.max_abs_diff(&y.rot90(n))?;
            report.checks += 1;
            report.worst = report.worst.max(d);
            if d > tolerance {
                report.failures += 1;
            }
        }
    }
    Ok(report)
}

/// Plain convolution with rotated kernels on a rotated input equals the
/// rotated output; calibrates the rotation utilities.
pub fn verify_conv_rotation_identity(trials: usize, seed: u64) -> Result<LayerReport> {
    let tolerance = invariance_tolerance(64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = LayerReport { trials, checks: 0, failures: 0, worst: 0.0, tolerance };
    for _ in 0..trials {
        let f = [1, 3, 5][rng.gen_range(0..3)];
        let stride = rng.gen_range(1..=2);
        let padding = rng.gen_range(0..=f / 2);
        let size = (rng.gen_range(2..=5) - 1) * stride + f - 2 * padding;
        let channels = rng.gen_range(1..=3);
        let x = Tensor::<f64>::from_fn([1, size, size, channels], |_| rng.gen_range(-1.0..1.0));
        let p = ConvParams::<f64>::glorot(&mut rng, f, channels, 2, stride, padding);
        let y = conv_forward(&x, &p)?;
        for n in 1..4 {
            let rotated = ConvParams { kernels: p.kernels.rot90(n), ..p.clone() };
            let d = conv_forward(&x.rot90(n), &rotated)?.max_abs_diff(&y.rot90(n))?;
            report.checks += 1;
            report.worst = report.worst.max(d);
            if d > tolerance {
                report.failures += 1;
            }
        }
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelReport {
    pub inputs: usize,
    pub checks: usize,
    pub failures: usize,
    pub worst: f64,
    pub tolerance: f64,
}

impl ModelReport {
    pub fn passed(&self) -> bool {
        self.failures == 0 && self.worst <= self.tolerance
    }
}

/// Logits of `x` against logits of `rot90(x, n)`, n = 1..3, for `trials`
/// uniform random inputs plus one constant input. Tolerance follows the
/// network's precision.
pub fn verify_model_invariance<T: Scalar>(net: &Network<T>, trials: usize, seed: u64) -> Result<ModelReport> {
    let [h, w, c] = net.config().input;
    let tolerance = invariance_tolerance(T::BITS);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut inputs = vec![Tensor::filled([1, h, w, c], T::of(0.5))];
    inputs.extend((0..trials).map(|_| Tensor::from_fn([1, h, w, c], |_| T::of(rng.gen_range(0.0..1.0)))));
    let diffs: Vec<[f64; 3]> = inputs
        .par_iter()
        .map(|x| -> Result<[f64; 3]> {
            let y = net.logits(x)?;
            let mut d = [0.0; 3];
            for (n, slot) in d.iter_mut().enumerate() {
                *slot = net.logits(&x.rot90(n as i64 + 1))?.max_abs_diff(&y)?;
            }
            Ok(d)
        })
        .collect::<Result<_>>()?;
    let all = diffs.iter().flatten();
    Ok(ModelReport {
        inputs: inputs.len(),
        checks: 3 * inputs.len(),
        failures: all.clone().filter(|&&d| d > tolerance).count(),
        worst: all.fold(0.0, |a, &d| a.max(d)),
        tolerance,
    })
}
