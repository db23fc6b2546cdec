use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::benchmarks::{BenchmarkReport, DiscreteMeasure};
use crate::error::{invalid, Result};
use crate::linalg::{toeplitz_project, ComplexMatrix, C64};

#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionOptions {
    /// Trapezoid grid on `[-1, 1]`, endpoints included.
    pub grid_size: usize,
    pub tol: f64,
    pub max_iter: usize,
    /// Starting density on the grid; zero when absent.
    pub init: Option<Vec<f64>>,
}

impl Default for ProjectionOptions {
    fn default() -> Self {
        Self { grid_size: 5000, tol: 1e-6, max_iter: 2000, init: None }
    }
}

/// Grid points and trapezoid weights.
pub fn trapezoid_grid(size: usize) -> (Vec<f64>, Vec<f64>) {
    let h = 2.0 / (size - 1) as f64;
    let xs = (0..size).map(|p| -1.0 + p as f64 * h).collect();
    let ws = (0..size).map(|p| if p == 0 || p + 1 == size { 0.5 * h } else { h }).collect();
    (xs, ws)
}

/// Real moment operator: rows `Re` then `Im` of `Σ_p w_p γ_p e^{jπkξ_p}`.
fn moment_operator(m: usize, xs: &[f64], ws: &[f64]) -> DMatrix<f64> {
    let mut b = DMatrix::zeros(2 * m, xs.len());
    for (p, (&x, &w)) in xs.iter().zip(ws).enumerate() {
        let step = C64::from_polar(1.0, PI * x);
        let mut z = C64::new(w, 0.0);
        for k in 0..m {
            b[(k, p)] = z.re;
            b[(m + k, p)] = z.im;
            z *= step;
        }
    }
    b
}

/// Pseudo-inverse of the symmetric PSD Gram matrix.
fn pinv_psd(g: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = g.clone().symmetric_eigen();
    let top = eig.eigenvalues.amax();
    let mut out = DMatrix::zeros(g.nrows(), g.ncols());
    for (i, &l) in eig.eigenvalues.iter().enumerate() {
        if l > 1e-12 * top {
            let v = eig.eigenvectors.column(i);
            out += &v * v.transpose() / l;
        }
    }
    out
}

/// Finds a nonnegative grid density whose first `M` moments match the
/// Toeplitzized `Σ̂_h`, by alternating the least-norm affine correction
/// with clipping at zero.
///
/// `trace` interleaves the lengths of the affine and clipping steps. The
/// returned covariance is assembled from the moments of the final density.
pub fn convex_projection(sigma_h: &ComplexMatrix, opts: &ProjectionOptions) -> Result<BenchmarkReport> {
    let m = sigma_h.ensure_square()?;
    if opts.grid_size < 2 {
        return Err(invalid("projection grid needs at least 2 points"));
    }
    let (xs, ws) = trapezoid_grid(opts.grid_size);
    let b = moment_operator(m, &xs, &ws);
    let (_, sigma_tilde) = toeplitz_project(sigma_h)?;
    let target = DVector::from_iterator(2 * m, sigma_tilde.iter().map(|z| z.re).chain(sigma_tilde.iter().map(|z| z.im)));
    let target_norm = target.norm();
    let gram_pinv = pinv_psd(&(&b * b.transpose()));
    let correction = b.transpose() * &gram_pinv;

    let mut gamma = match &opts.init {
        Some(g) if g.len() == opts.grid_size => DVector::from_column_slice(g),
        Some(g) => return Err(invalid(format!("initial density has {} points, grid has {}", g.len(), opts.grid_size))),
        None => DVector::zeros(opts.grid_size),
    };
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut residual = (&b * &gamma - &target).norm();
    while iterations < opts.max_iter {
        if residual <= opts.tol * target_norm && gamma.iter().all(|&g| g >= 0.0) {
            converged = true;
            break;
        }
        iterations += 1;
        let r = &b * &gamma - &target;
        let step = &correction * &r;
        trace.push(step.norm());
        gamma -= step;
        let before = gamma.clone();
        gamma.iter_mut().for_each(|g| *g = g.max(0.0));
        trace.push((&gamma - before).norm());
        residual = (&b * &gamma - &target).norm();
    }
    if !converged && residual <= opts.tol * target_norm {
        converged = true;
    }
    if !converged {
        log::debug!("convex projection: residual {residual:e} after {iterations} iterations");
    }

    let moments = &b * &gamma;
    let mut lags: Vec<C64> = (0..m).map(|k| C64::new(moments[k], moments[m + k])).collect();
    lags[0].im = 0.0;
    let weights = gamma.iter().zip(&ws).map(|(g, w)| g * w).collect();
    Ok(BenchmarkReport {
        method: "projection".into(),
        covariance: ComplexMatrix::hermitian_toeplitz(&lags),
        iterations,
        residual,
        converged,
        trace,
        measure: Some(DiscreteMeasure { locations: xs, weights }),
        flags: Vec::new(),
    })
}
