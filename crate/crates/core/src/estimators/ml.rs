use std::time::Instant;

use nalgebra::DMatrix;

use crate::channel::{sample_covariance_y, SampleBatch};
use crate::dictionary::DesignSystem;
use crate::error::{invalid, Error, Result};
use crate::estimators::{estimate_nnls, EstimatorReport};
use crate::linalg::{to_nalgebra, ComplexMatrix, HpdFactor, C64};

/// Model covariance `Σ(u) + N0·I`.
fn model_covariance(system: &DesignSystem, u: &[f64], n0: f64) -> Result<ComplexMatrix> {
    if u.len() != system.len() {
        return Err(Error::DimensionMismatch(format!("u has {} entries, design has {}", u.len(), system.len())));
    }
    let mut c = ComplexMatrix::hermitian_toeplitz(&system.lags(u));
    c.add_diag(n0);
    Ok(c)
}

fn check_inputs(system: &DesignSystem, sigma_y: &ComplexMatrix, n0: f64) -> Result<()> {
    let m = sigma_y.ensure_square()?;
    if m != system.m {
        return Err(Error::DimensionMismatch(format!("Σ̂_y is {m}x{m}, design has M = {}", system.m)));
    }
    if !(n0 >= 0.0 && n0.is_finite()) {
        return Err(invalid(format!("N0 must be finite and >= 0, got {n0}")));
    }
    Ok(())
}

/// `log det C + tr(C⁻¹ Σ̂_y)` with `C = Σ(u) + N0·I`.
pub fn neg_log_likelihood(u: &[f64], system: &DesignSystem, sigma_y: &ComplexMatrix, n0: f64) -> Result<f64> {
    check_inputs(system, sigma_y, n0)?;
    let c = model_covariance(system, u, n0)?;
    let chol = HpdFactor::new(&c)?;
    Ok(chol.log_det() + chol.solve(sigma_y).trace().re)
}

/// `∂f/∂u_i = tr((C⁻¹ − C⁻¹Σ̂_yC⁻¹) S_i)`.
pub fn ml_gradient(u: &[f64], system: &DesignSystem, sigma_y: &ComplexMatrix, n0: f64) -> Result<Vec<f64>> {
    check_inputs(system, sigma_y, n0)?;
    let m = system.m;
    let c = model_covariance(system, u, n0)?;
    let cinv = to_nalgebra(&HpdFactor::new(&c)?.inverse());
    let r = to_nalgebra(sigma_y);
    let x = &cinv - &cinv * r * &cinv;
    // tr(X S) for Hermitian Toeplitz S with first column s is
    // Re Σ_k ω_k d_k s_k, where d_k sums the k-th superdiagonal of X.
    let d: Vec<C64> = (0..m).map(|k| (0..m - k).map(|i| x[(i, i + k)]).sum()).collect();
    Ok((0..system.len())
        .map(|i| {
            (0..m)
                .map(|k| {
                    let w = if k == 0 { 1.0 } else { 2.0 };
                    w * (d[k] * system.a_tilde[(k, i)]).re
                })
                .sum()
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmOptions {
    /// Starting point; the NNLS fit when absent.
    pub u0: Option<Vec<f64>>,
    /// Stop once the objective drops by at most this much; `1e-4·M` when absent.
    pub eps_em: Option<f64>,
    pub max_iter: usize,
}

impl Default for EmOptions {
    fn default() -> Self {
        Self { u0: None, eps_em: None, max_iter: 100 }
    }
}

const FREEZE_LEVEL: f64 = 1e-10;
const FREEZE_AFTER: usize = 5;

/// EM for the variances of an all-Dirac dictionary from snapshot data.
pub fn em_estimate(batch: &SampleBatch, system: &DesignSystem, opts: &EmOptions) -> Result<EstimatorReport> {
    em_estimate_cov(&sample_covariance_y(batch), batch.noise_power(), system, opts)
}

/// EM driven by the sufficient statistic `Σ̂_y`.
///
/// With `C = D U D^H + N0·I`, `p_i = a_i^H C⁻¹ a_i` and
/// `q_i = (C⁻¹a_i)^H Σ̂_y (C⁻¹a_i)`, the E-step posterior variance is
/// `u_i − u_i² p_i` and the mean power is `u_i² q_i`; the M-step adds them.
pub fn em_estimate_cov(
    sigma_y: &ComplexMatrix,
    n0: f64,
    system: &DesignSystem,
    opts: &EmOptions,
) -> Result<EstimatorReport> {
    let start = Instant::now();
    check_inputs(system, sigma_y, n0)?;
    if n0 <= 0.0 {
        return Err(invalid("EM needs N0 > 0"));
    }
    if system.dirac_locations().is_none() {
        return Err(invalid("EM needs an all-Dirac design"));
    }
    let mut u = match &opts.u0 {
        Some(u0) => {
            if u0.len() != system.len() {
                return Err(Error::DimensionMismatch(format!("u0 has {} entries, design has {}", u0.len(), system.len())));
            }
            if u0.iter().any(|&v| !(v >= 0.0 && v.is_finite())) {
                return Err(invalid("u0 must be finite and nonnegative"));
            }
            u0.clone()
        }
        None => estimate_nnls(system)?.u,
    };
    let eps = opts.eps_em.unwrap_or(1e-4 * system.m as f64);
    let m = system.m;
    let r = to_nalgebra(sigma_y);
    let mut frozen = vec![false; u.len()];
    let mut zero_run = vec![0usize; u.len()];

    let mut f = neg_log_likelihood(&u, system, sigma_y, n0)?;
    let mut trace = vec![f];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        let active: Vec<usize> = (0..u.len()).filter(|&i| !frozen[i]).collect();
        if active.is_empty() {
            converged = true;
            break;
        }
        let c = model_covariance(system, &u, n0)?;
        let chol = HpdFactor::new(&c)?;
        let d = DMatrix::from_fn(m, active.len(), |row, col| system.a_tilde[(row, active[col])]);
        let b = chol.solve_na(&d);
        let rb = &r * &b;
        let mut next = u.clone();
        for (col, &i) in active.iter().enumerate() {
            let p: f64 = (0..m).map(|k| (d[(k, col)].conj() * b[(k, col)]).re).sum();
            let q: f64 = (0..m).map(|k| (b[(k, col)].conj() * rb[(k, col)]).re).sum();
            let ui = u[i];
            next[i] = (ui - ui * ui * p).max(0.0) + ui * ui * q;
        }
        for &i in &active {
            if next[i] <= FREEZE_LEVEL {
                zero_run[i] += 1;
                if zero_run[i] >= FREEZE_AFTER {
                    frozen[i] = true;
                    next[i] = 0.0;
                }
            } else {
                zero_run[i] = 0;
            }
        }
        u = next;
        iterations += 1;
        let f_next = neg_log_likelihood(&u, system, sigma_y, n0)?;
        trace.push(f_next);
        let drop = f - f_next;
        f = f_next;
        if drop <= eps {
            converged = true;
            break;
        }
    }
    Ok(EstimatorReport::new(system, u, trace, iterations, converged, start))
}
