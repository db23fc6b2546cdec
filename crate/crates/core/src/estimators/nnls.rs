use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use crate::dictionary::DesignSystem;
use crate::error::{invalid, Result};
use crate::estimators::EstimatorReport;
use crate::linalg::ComplexMatrix;

/// Output of the active-set solver.
#[derive(Clone, Debug, PartialEq)]
pub struct NnlsSolution {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// `‖Ax − f‖` after each outer iteration.
    pub residuals: Vec<f64>,
}

/// Lawson–Hanson active-set NNLS for `min ‖Ax − f‖` subject to `x ≥ 0`.
///
/// Stops once no inactive coordinate has gradient above
/// `tol · ‖Aᵀf‖∞`, or after `max_outer` outer iterations.
pub fn nnls(a: &DMatrix<f64>, f: &DVector<f64>, tol: f64, max_outer: usize) -> Result<NnlsSolution> {
    let n = a.ncols();
    if n == 0 {
        return Err(invalid("NNLS needs at least one column"));
    }
    if a.nrows() != f.len() {
        return Err(invalid(format!("NNLS: A has {} rows, f has {}", a.nrows(), f.len())));
    }
    let gram = a.transpose() * a;
    let atf = a.transpose() * f;
    let f_sq = f.norm_squared();
    Ok(nnls_gram(&gram, &atf, f_sq, tol, max_outer))
}

/// Same solver driven by `AᵀA`, `Aᵀf` and `‖f‖²`.
pub(crate) fn nnls_gram(gram: &DMatrix<f64>, atf: &DVector<f64>, f_sq: f64, tol: f64, max_outer: usize) -> NnlsSolution {
    let n = gram.ncols();
    let scale = atf.amax();
    let residual = |x: &DVector<f64>| (f_sq - 2.0 * atf.dot(x) + (gram * x).dot(x)).max(0.0).sqrt();
    let mut x = DVector::zeros(n);
    let mut passive = vec![false; n];
    let mut residuals = Vec::new();
    if scale == 0.0 {
        return NnlsSolution { x: x.as_slice().to_vec(), iterations: 0, converged: true, residuals: vec![residual(&x)] };
    }
    let thresh = tol * scale;
    let mut banned = vec![false; n];
    let mut iterations = 0;
    let mut converged = false;

    loop {
        let w = atf - gram * &x;
        let candidate = (0..n)
            .filter(|&j| !passive[j] && !banned[j] && w[j] > thresh)
            .max_by(|&i, &j| w[i].total_cmp(&w[j]));
        let Some(t) = candidate else {
            converged = true;
            break;
        };
        if iterations == max_outer {
            break;
        }
        iterations += 1;
        passive[t] = true;

        loop {
            let idx: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
            let z = solve_passive(gram, atf, &idx);
            if idx.iter().zip(&z).all(|(_, &v)| v > 0.0) {
                for (&j, &v) in idx.iter().zip(&z) {
                    x[j] = v;
                }
                break;
            }
            // Step towards z until the first passive coordinate hits zero.
            let mut alpha = f64::INFINITY;
            let mut limiting = idx[0];
            for (&j, &v) in idx.iter().zip(&z) {
                if v <= 0.0 {
                    let gap = x[j] - v;
                    let ratio = if gap > 0.0 { x[j] / gap } else { 0.0 };
                    if ratio < alpha {
                        alpha = ratio;
                        limiting = j;
                    }
                }
            }
            for (&j, &v) in idx.iter().zip(&z) {
                x[j] += alpha * (v - x[j]);
            }
            x[limiting] = 0.0;
            passive[limiting] = false;
            for &j in &idx {
                if x[j] <= 0.0 {
                    x[j] = 0.0;
                    passive[j] = false;
                }
            }
            if !passive.iter().any(|&p| p) {
                break;
            }
        }
        if passive[t] {
            banned.iter_mut().for_each(|b| *b = false);
        } else {
            // The entering coordinate was pushed straight back out; skip it
            // until the active set changes.
            banned[t] = true;
        }
        residuals.push(residual(&x));
    }
    if residuals.is_empty() {
        residuals.push(residual(&x));
    }
    NnlsSolution { x: x.as_slice().to_vec(), iterations, converged, residuals }
}

/// Unconstrained least squares restricted to the columns in `idx`.
fn solve_passive(gram: &DMatrix<f64>, atf: &DVector<f64>, idx: &[usize]) -> Vec<f64> {
    let k = idx.len();
    let g = DMatrix::from_fn(k, k, |r, c| gram[(idx[r], idx[c])]);
    let b = DVector::from_fn(k, |r, _| atf[idx[r]]);
    if let Some(ch) = g.clone().cholesky() {
        let z = ch.solve(&b);
        if z.iter().all(|v| v.is_finite()) {
            return z.as_slice().to_vec();
        }
    }
    let eig = g.symmetric_eigen();
    let lmax = eig.eigenvalues.amax();
    let mut z = DVector::zeros(k);
    for (i, &l) in eig.eigenvalues.iter().enumerate() {
        if l > 1e-13 * lmax {
            let v = eig.eigenvectors.column(i);
            z += v * (v.dot(&b) / l);
        }
    }
    z.as_slice().to_vec()
}

pub const NNLS_TOL: f64 = 1e-10;

/// Nonnegative fit of the weighted Toeplitz moments `‖W(Ãu − σ̃)‖`.
pub fn estimate_nnls(system: &DesignSystem) -> Result<EstimatorReport> {
    let start = Instant::now();
    let (a, f) = system.real_stacked();
    let sol = nnls(&a, &f, NNLS_TOL, 3 * system.len())?;
    if !sol.converged {
        log::warn!("NNLS hit the outer-iteration cap ({})", sol.iterations);
    }
    Ok(EstimatorReport::new(system, sol.x, sol.residuals, sol.iterations, sol.converged, start))
}

/// NNLS on the full matrix objective `‖Σ_i u_i S_i − Σ̂_h‖_F`, stacking the
/// real and imaginary parts of all `M²` entries.
pub fn nnls_full_matrix(sigma_h: &ComplexMatrix, system: &DesignSystem) -> Result<Vec<f64>> {
    let m = sigma_h.ensure_square()?;
    if m != system.m {
        return Err(invalid("Σ̂_h and design disagree on M"));
    }
    let k = system.len();
    let mut a = DMatrix::zeros(2 * m * m, k);
    let mut f = DVector::zeros(2 * m * m);
    for c in 0..k {
        let s = ComplexMatrix::hermitian_toeplitz(&system.a_tilde.column(c));
        for (i, z) in s.data().iter().enumerate() {
            a[(i, c)] = z.re;
            a[(m * m + i, c)] = z.im;
        }
    }
    for (i, z) in sigma_h.data().iter().enumerate() {
        f[i] = z.re;
        f[m * m + i] = z.im;
    }
    Ok(nnls(&a, &f, NNLS_TOL, 3 * k)?.x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_clamps_negative_coordinates() {
        let a = DMatrix::identity(3, 3);
        let f = DVector::from_vec(vec![1.0, -2.0, 3.0]);
        let s = nnls(&a, &f, 1e-10, 9).unwrap();
        assert!(s.converged);
        assert_eq!(s.x, vec![1.0, 0.0, 3.0]);
    }

    #[test]
    fn single_column_least_squares() {
        let a = DMatrix::from_vec(2, 1, vec![1.0, 1.0]);
        let f = DVector::from_vec(vec![1.0, 3.0]);
        let s = nnls(&a, &f, 1e-10, 3).unwrap();
        assert!((s.x[0] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn zero_target() {
        let a = DMatrix::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]);
        let s = nnls(&a, &DVector::zeros(2), 1e-10, 6).unwrap();
        assert_eq!(s.x, vec![0.0, 0.0]);
        assert!(s.converged);
    }

    #[test]
    fn shape_errors() {
        assert!(nnls(&DMatrix::zeros(2, 0), &DVector::zeros(2), 1e-10, 1).is_err());
        assert!(nnls(&DMatrix::zeros(2, 1), &DVector::zeros(3), 1e-10, 1).is_err());
    }
}
