//! Floating-point element types.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Element type of tensors and parameters: `f32` for training, `f64` for
/// verification runs.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Default + Debug + Display + Send + Sync + 'static
{
    /// Bit width stored in checkpoint headers.
    const BITS: u8;

    fn of(value: f64) -> Self;

    fn as_f64(self) -> f64;

    fn write_le(self, out: &mut Vec<u8>);

    /// Reads one element from the front of `bytes`, which must hold at least
    /// `BITS / 8` bytes.
    fn read_le(bytes: &[u8]) -> Self;
}

impl Scalar for f32 {
    const BITS: u8 = 32;

    fn of(value: f64) -> Self {
        value as f32
    }

    fn as_f64(self) -> f64 {
        self as f64
    }

    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }

    fn read_le(bytes: &[u8]) -> Self {
        f32::from_le_bytes(bytes[..4].try_into().unwrap())
    }
}

impl Scalar for f64 {
    const BITS: u8 = 64;

    fn of(value: f64) -> Self {
        value
    }

    fn as_f64(self) -> f64 {
        self
    }

    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }

    fn read_le(bytes: &[u8]) -> Self {
        f64::from_le_bytes(bytes[..8].try_into().unwrap())
    }
}

/// Sum that does not depend on the order of `values`.
///
/// Values are sorted by total order before accumulation, so any permutation
/// of the same multiset yields the same bits. Pooling and reductions that must
/// commute exactly with quarter turns go through this.
pub fn order_free_sum<T: Scalar>(values: &mut [T]) -> T {
    values.sort_by(|a, b| total_cmp(*a, *b));
    values.iter().fold(T::zero(), |acc, &v| acc + v)
}

/// IEEE total order, via `f64` (lossless for both supported widths).
pub fn total_cmp<T: Scalar>(a: T, b: T) -> std::cmp::Ordering {
    a.as_f64().total_cmp(&b.as_f64())
}
