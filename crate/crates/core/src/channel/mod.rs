//! Ground-truth angular scattering functions, covariance synthesis and
//! snapshot generation.

mod asf;
pub mod quadrature;
mod random;
mod sampling;

pub use asf::{
    array_response, asf_covariance, asf_lags, noise_power_for_snr, parse_asf, read_asf_file, rect_lag,
    two_spike_two_rect_scene, write_asf, write_asf_file, Asf, Piece, Spike,
};
pub use random::{random_mixed_asf, MixedAsfParams};
pub use sampling::{
    complex_normal, draw_samples, draw_samples_stream, rng_for, sample_covariance_h, sample_covariance_y,
    SampleBatch,
};
