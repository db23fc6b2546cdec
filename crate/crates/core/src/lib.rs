//! Channel covariance estimation for massive-MIMO uplinks from few noisy
//! snapshots, using a mixed angular scattering model: spikes located by
//! MDL + MUSIC and a diffuse part expanded on a nonnegative dictionary.

pub mod benchmarks;
pub mod channel;
pub mod dictionary;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod linalg;
pub mod metrics;
pub mod spikes;

pub use error::{Error, Result};
