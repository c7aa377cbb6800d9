//! Shared inputs for the kernel benchmarks.

use rrl_core::Tensor;

/// Deterministic pseudo-random map in `[0, 1)` (a small LCG, so benchmarks
/// do not depend on an RNG crate's stream).
pub fn pseudo_random_map(shape: [usize; 4], seed: u64) -> Tensor<f32> {
    let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    Tensor::from_fn(shape, |_| {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (state >> 40) as f32 / (1u64 << 24) as f32
    })
}
