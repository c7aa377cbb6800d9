//! Verification suites and experiments.
//!
//! Every suite is deterministic for a given seed and returns a report rather
//! than panicking; callers decide what a failure means.

mod gradient;
mod invariance;
mod sweep;
mod trend;

pub use gradient::{gradient_check, GradientReport};
pub use invariance::{
    verify_conv_rotation_identity, verify_layer_equivariance, verify_model_invariance, verify_window_invariance,
    LayerReport, LayerUnderTest, ModelReport, WindowReport,
};
pub use sweep::{angle_sweep, feature_distance, sweep_csv, SweepRow};
pub use trend::{trend_experiment, TrendReport, TrendRow};

/// Tolerance for "exactly equal up to rounding" at a given precision.
pub fn invariance_tolerance(bits: u8) -> f64 {
    if bits == 64 {
        1e-12
    } else {
        1e-5
    }
}
