//! Coefficient estimators for the dictionary model: NNLS, QP and ML-EM.

mod ml;
mod nnls;
mod qp;

use std::time::Instant;

pub use ml::{em_estimate, em_estimate_cov, ml_gradient, neg_log_likelihood, EmOptions};
pub use nnls::{estimate_nnls, nnls, nnls_full_matrix, NnlsSolution, NNLS_TOL};
pub use qp::{estimate_qp, QpOptions};

use crate::dictionary::DesignSystem;
use crate::spikes::SpikeEstimate;

/// Fitted coefficients (continuous atoms first, then spikes) and diagnostics.
#[derive(Clone, Debug)]
pub struct EstimatorReport {
    pub u: Vec<f64>,
    pub spikes: SpikeEstimate,
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub wall_time: f64,
}

impl EstimatorReport {
    pub(crate) fn new(
        system: &DesignSystem,
        u: Vec<f64>,
        objective_trace: Vec<f64>,
        iterations: usize,
        converged: bool,
        start: Instant,
    ) -> Self {
        let spikes = SpikeEstimate {
            order: system.spike_count(),
            locations: system.spike_locations().to_vec(),
            pseudo_spectrum: None,
        };
        Self { u, spikes, objective_trace, iterations, converged, wall_time: start.elapsed().as_secs_f64() }
    }
}

/// Upper bound on NNLS FLOPs with `i` active atoms, `j_avg` inner iterations
/// per outer step, `g` atoms and `m` antennas.
pub fn flops_nnls(i: usize, j_avg: f64, g: usize, m: usize) -> f64 {
    let (i, g, m) = (i as f64, g as f64, m as f64);
    4.0 * (i + 1.0) * g * m
        + (1.0 + j_avg)
            * (i.powi(4) / 8.0 + (m + 0.75) * i.powi(3) + (3.0 * m + 0.875) * i * i + (2.0 * m + 0.25) * i)
}

/// FLOPs of `i_em` EM iterations with `g` atoms, `m` antennas, `n` snapshots.
pub fn flops_em(i_em: usize, g: usize, m: usize, n: usize) -> f64 {
    let (i, g, m, n) = (i_em as f64, g as f64, m as f64, n as f64);
    g * m * (n + (g + 1.0) / 2.0) + i * (g.powi(3) / 2.0 + g * g * (n + 1.5) + g * n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flop_examples() {
        assert_eq!(flops_nnls(0, 3.0, 7, 5), 4.0 * 7.0 * 5.0);
        assert!((flops_nnls(1, 0.0, 1, 1) - 16.0).abs() < 1e-12);
        assert_eq!(flops_em(0, 3, 4, 5), 3.0 * 4.0 * (5.0 + 2.0));
        assert!((flops_em(1, 1, 1, 1) - 6.0).abs() < 1e-12);
        let big = flops_em(10, 1000, 8, 4);
        assert!((big / (10.0 * 1e9 / 2.0) - 1.0).abs() < 0.02);
    }

    #[test]
    fn flops_monotone() {
        let base = flops_nnls(3, 1.0, 10, 8);
        assert!(flops_nnls(4, 1.0, 10, 8) > base);
        assert!(flops_nnls(3, 2.0, 10, 8) > base);
        assert!(flops_nnls(3, 1.0, 11, 8) > base);
        assert!(flops_nnls(3, 1.0, 10, 9) > base);
        let base = flops_em(3, 10, 8, 5);
        assert!(flops_em(4, 10, 8, 5) > base);
        assert!(flops_em(3, 11, 8, 5) > base);
        assert!(flops_em(3, 10, 9, 5) > base);
        assert!(flops_em(3, 10, 8, 6) > base);
    }
}
