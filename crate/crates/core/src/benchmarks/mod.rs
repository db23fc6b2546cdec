//! Competitor estimators: Toeplitz-PSD projection, SPICE and the convex
//! moment-projection method.

mod pocs;
mod projection;
mod spice;

pub use pocs::toeplitz_psd;
pub use projection::{convex_projection, trapezoid_grid, ProjectionOptions};
pub use spice::{spice, SpiceOptions};

use crate::error::Result;
use crate::linalg::{ComplexMatrix, C64};

/// Nonnegative point masses `Σ w_i δ(ξ − ξ_i)` behind an estimate.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteMeasure {
    pub locations: Vec<f64>,
    pub weights: Vec<f64>,
}

impl DiscreteMeasure {
    /// `Σ w_i a(νξ_i) a(νξ_i)^H`.
    pub fn covariance(&self, m: usize, nu: f64) -> Result<ComplexMatrix> {
        let mut lags = vec![C64::new(0.0, 0.0); m];
        for (&x, &w) in self.locations.iter().zip(&self.weights) {
            if w == 0.0 {
                continue;
            }
            let step = C64::from_polar(1.0, std::f64::consts::PI * nu * x);
            let mut z = C64::new(w, 0.0);
            for l in lags.iter_mut() {
                *l += z;
                z *= step;
            }
        }
        if let Some(l0) = lags.first_mut() {
            l0.im = 0.0;
        }
        Ok(ComplexMatrix::hermitian_toeplitz(&lags))
    }
}

#[derive(Clone, Debug)]
pub struct BenchmarkReport {
    pub method: String,
    pub covariance: ComplexMatrix,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
    /// Per-iteration diagnostic (step lengths or objective values).
    pub trace: Vec<f64>,
    /// Present for methods that can be re-evaluated at another carrier.
    pub measure: Option<DiscreteMeasure>,
    /// Notes such as solver fallbacks.
    pub flags: Vec<String>,
}
