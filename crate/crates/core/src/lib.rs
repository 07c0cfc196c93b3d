//! Delay-Doppler (OTFS) link simulation with embedded pilot channel estimation.
//!
//! The numeric core is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the common double-precision instantiations.

pub mod alphabet;
pub mod channel;
pub mod dd_io;
pub mod detector;
pub mod error;
pub mod estimator;
pub mod grid;
pub mod harness;
pub mod layout;
pub mod scalar;
pub mod tf_oracle;

pub use alphabet::Alphabet;
pub use channel::{DopplerMode, PathSpec, PowerDelayProfile, Tap, TapSet};
pub use dd_io::NoiseModel;
pub use detector::{MpConfig, Pulse, SparseSystem};
pub use error::{Error, Result};
pub use estimator::EstimatedChannel;
pub use grid::{DdFrame, GridDims};
pub use harness::{run_experiment, MetricsRow, SimConfig};
pub use layout::{CellKind, FrameLayout, LayoutParams, Scheme};
pub use scalar::Real;

pub type Complex64 = num_complex::Complex<f64>;
pub type Frame = DdFrame<f64>;
pub type Frame32 = DdFrame<f32>;
pub type Taps = TapSet<f64>;
pub type Taps32 = TapSet<f32>;
pub type Qam = Alphabet<f64>;
