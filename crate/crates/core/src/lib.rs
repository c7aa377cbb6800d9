//! Regional rotation layers for rotation-invariant convolutional networks.
//!
//! A regional rotation layer (RRL) walks a feature map with a sliding window,
//! rotates every window into the orientation that minimizes its local binary
//! pattern code, and tiles the canonical windows so that a stride-`F`
//! convolution sees one canonical window per output position. Stacking
//! RRL + convolution pairs keeps feature maps equivariant to quarter turns of
//! the input; a final global RRL turns that equivariance into invariance.
//!
//! Module map:
//!
//! * [`tensor`]: dense `[batch, height, width, channels]` arrays, rotations,
//!   sliding-window extraction and tiling.
//! * [`lbp`]: LBP codes, candidate rotations and canonical orientation.
//! * [`rrl`]: the windowed layer, its backward pass and the global variant.
//! * [`nn`]: convolution, pooling, activations, dense layers, loss, SGD and
//!   checkpoints.
//! * [`models`]: declarative network configs, presets and training.
//! * [`geometry`]: bounding-box quarter turns and inscribed-circle masks.
//! * [`data`]: IDX / netpbm loaders, rotated test sets, synthetic glyphs.
//! * [`harness`]: invariance suites, angle sweeps and trend experiments.

pub mod data;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod lbp;
pub mod models;
pub mod nn;
pub mod rrl;
pub mod scalar;
pub mod tensor;

pub use error::{Error, Result};
pub use geometry::BBox;
pub use lbp::LbpMode;
pub use models::{LayerSpec, Network, NetworkConfig, Precision};
pub use rrl::{ChannelPolicy, RotationRecord};
pub use scalar::Scalar;
pub use tensor::{Tensor, WindowGrid, Windows};
