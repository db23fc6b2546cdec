//! Spike detection: MDL model order and MUSIC localization.

use std::f64::consts::PI;

use rustfft::FftPlanner;

use crate::error::{invalid, Result};
use crate::linalg::{hermitian_eig, ComplexMatrix, HermitianEig, C64};

/// Floor applied to eigenvalues inside the MDL products and means.
pub const EIGEN_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct SpikeEstimate {
    pub order: usize,
    /// Sorted ascending.
    pub locations: Vec<f64>,
    /// `(grid, η̂)` when requested.
    pub pseudo_spectrum: Option<(Vec<f64>, Vec<f64>)>,
}

impl SpikeEstimate {
    pub fn none() -> Self {
        Self { order: 0, locations: Vec::new(), pseudo_spectrum: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MusicOptions {
    pub grid_size: usize,
    pub refine: bool,
    pub keep_spectrum: bool,
}

impl Default for MusicOptions {
    fn default() -> Self {
        Self { grid_size: 4096, refine: true, keep_spectrum: false }
    }
}

/// MDL score for each candidate order `k = 0..M`.
pub fn mdl_scores(eigenvalues: &[f64], n: usize) -> Result<Vec<f64>> {
    let m = eigenvalues.len();
    if m < 2 {
        return Err(invalid("MDL needs at least two eigenvalues"));
    }
    if n < 2 {
        return Err(invalid("MDL needs N >= 2"));
    }
    let lam: Vec<f64> = eigenvalues.iter().map(|l| l.max(EIGEN_FLOOR)).collect();
    let nf = n as f64;
    let mf = m as f64;
    let mut tail_sum: f64 = lam.iter().sum();
    let mut head_log = 0.0;
    let mut scores = Vec::with_capacity(m);
    for k in 0..m {
        if k > 0 {
            tail_sum -= lam[k - 1];
            head_log += lam[k - 1].ln();
        }
        let rest = (m - k) as f64;
        let a = (tail_sum / rest).max(EIGEN_FLOOR);
        let kf = k as f64;
        scores.push(nf * (rest * a.ln() + head_log) + 0.5 * kf * (2.0 * mf - kf) * nf.ln());
    }
    Ok(scores)
}

/// Model order by MDL; ties go to the smaller order.
pub fn mdl_order(eigenvalues: &[f64], n: usize) -> Result<usize> {
    let scores = mdl_scores(eigenvalues, n)?;
    if eigenvalues.iter().all(|&l| l <= EIGEN_FLOOR) {
        return Ok(0);
    }
    let mut best = 0;
    for (k, &s) in scores.iter().enumerate() {
        if s < scores[best] {
            best = k;
        }
    }
    Ok(best)
}

/// Uniform grid `ξ_g = −1 + 2g/L` on `[-1, 1)`.
pub fn uniform_grid(size: usize) -> Vec<f64> {
    (0..size).map(|g| -1.0 + 2.0 * g as f64 / size as f64).collect()
}

/// `η̂(ξ) = ‖U_noi^H a(ξ)‖²` at each grid point.
pub fn music_pseudospectrum(noise_basis: &ComplexMatrix, grid: &[f64]) -> Result<Vec<f64>> {
    if grid.is_empty() {
        return Err(invalid("pseudo-spectrum grid is empty"));
    }
    let m = noise_basis.rows();
    if noise_basis.cols() == 0 || noise_basis.cols() > m {
        return Err(invalid("noise basis must have between 1 and M columns"));
    }
    let cols: Vec<Vec<C64>> = (0..noise_basis.cols()).map(|c| noise_basis.column(c)).collect();
    Ok(grid
        .iter()
        .map(|&xi| {
            let step = C64::from_polar(1.0, PI * xi);
            let mut total = 0.0;
            for col in &cols {
                let mut phase = C64::new(1.0, 0.0);
                let mut acc = C64::new(0.0, 0.0);
                for u in col {
                    acc += u.conj() * phase;
                    phase *= step;
                }
                total += acc.norm_sqr();
            }
            total.clamp(0.0, m as f64)
        })
        .collect())
}

/// Pseudo-spectrum on the uniform grid of `size` points, computed by FFT.
pub fn music_pseudospectrum_uniform(noise_basis: &ComplexMatrix, size: usize) -> Result<Vec<f64>> {
    let m = noise_basis.rows();
    if size < m {
        return music_pseudospectrum(noise_basis, &uniform_grid(size));
    }
    if noise_basis.cols() == 0 || noise_basis.cols() > m {
        return Err(invalid("noise basis must have between 1 and M columns"));
    }
    let fft = FftPlanner::<f64>::new().plan_fft_inverse(size);
    let mut eta = vec![0.0; size];
    let mut buf = vec![C64::new(0.0, 0.0); size];
    for c in 0..noise_basis.cols() {
        buf.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
        // u^H a(ξ_g) = Σ_m conj(u_m)(−1)^m e^{j2πmg/L}
        for (k, slot) in buf.iter_mut().take(m).enumerate() {
            let u = noise_basis[(k, c)].conj();
            *slot = if k % 2 == 0 { u } else { -u };
        }
        fft.process(&mut buf);
        for (e, z) in eta.iter_mut().zip(&buf) {
            *e += z.norm_sqr();
        }
    }
    let cap = m as f64;
    eta.iter_mut().for_each(|e| *e = e.clamp(0.0, cap));
    Ok(eta)
}

/// The `count` smallest strict interior local minima of `values`, as indices.
fn smallest_local_minima(values: &[f64], count: usize) -> Vec<usize> {
    let mut minima: Vec<usize> = (1..values.len().saturating_sub(1))
        .filter(|&g| values[g] < values[g - 1] && values[g] < values[g + 1])
        .collect();
    minima.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    minima.truncate(count);
    minima
}

/// MDL + MUSIC on a sample covariance `Σ̂_y` built from `n` snapshots.
pub fn detect_spikes(sigma_y: &ComplexMatrix, n: usize, opts: &MusicOptions) -> Result<SpikeEstimate> {
    let eig = hermitian_eig(sigma_y)?;
    detect_spikes_with_eig(&eig, n, opts)
}

pub fn detect_spikes_with_eig(eig: &HermitianEig, n: usize, opts: &MusicOptions) -> Result<SpikeEstimate> {
    if opts.grid_size < 3 {
        return Err(invalid("MUSIC grid needs at least 3 points"));
    }
    let m = eig.eigenvalues.len();
    let order = mdl_order(&eig.eigenvalues, n)?;
    let noise = eig.trailing_vectors(m - order);
    let eta = music_pseudospectrum_uniform(&noise, opts.grid_size)?;
    let minima = smallest_local_minima(&eta, order);
    if minima.len() < order {
        log::info!("MDL order {order} exceeds the {} local minima found; shrinking", minima.len());
    }
    let step = 2.0 / opts.grid_size as f64;
    let mut locations: Vec<f64> = minima
        .iter()
        .map(|&g| {
            let xi = -1.0 + g as f64 * step;
            if !opts.refine {
                return xi;
            }
            let (em, e0, ep) = (eta[g - 1], eta[g], eta[g + 1]);
            let denom = em - 2.0 * e0 + ep;
            let delta = if denom > 0.0 { 0.5 * (em - ep) / denom } else { 0.0 };
            (xi + delta.clamp(-0.5, 0.5) * step).clamp(-1.0, 1.0 - f64::EPSILON)
        })
        .collect();
    locations.sort_by(f64::total_cmp);
    let pseudo_spectrum = opts.keep_spectrum.then(|| (uniform_grid(opts.grid_size), eta));
    Ok(SpikeEstimate { order: locations.len(), locations, pseudo_spectrum })
}
