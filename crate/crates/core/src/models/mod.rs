//! Declarative network configs, presets, networks and training.

mod config;
mod network;
mod train;

pub use config::{LayerSpec, NetworkConfig, Precision, PRESETS};
pub use network::{Aux, Gradients, Network, Trace};
pub use train::{evaluate, predict, train, Evaluation, EpochStats, TrainConfig};
