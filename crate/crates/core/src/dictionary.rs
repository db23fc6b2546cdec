//! Atom families for the diffuse part and the weighted Toeplitz design system.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, RwLock};

use nalgebra::{DMatrix, DVector};

use crate::channel::quadrature::lag_moments;
use crate::channel::rect_lag;
use crate::error::{invalid, Error, Result};
use crate::linalg::{toeplitz_project, ComplexMatrix, C64};

/// A unit-mass density on `[-1, 1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Atom {
    Dirac { location: f64 },
    /// Gaussian kernel on `center ± half_width` (clipped to `[-1, 1]`),
    /// optionally multiplied by `J(ξ) = 1/√(1−ξ²)`. `scale` normalizes the
    /// product to unit mass.
    TruncGauss { center: f64, sigma: f64, half_width: f64, skewed: bool, scale: f64 },
    Rect { alpha: f64, beta: f64 },
}

impl Atom {
    /// Builds a normalized truncated Gaussian atom.
    pub fn trunc_gauss(center: f64, sigma: f64, half_width: f64, skewed: bool) -> Result<Self> {
        if !(sigma > 0.0 && half_width > 0.0 && center.is_finite()) {
            return Err(invalid("truncated gaussian needs sigma > 0 and half_width > 0"));
        }
        let (lo, hi) = ((center - half_width).max(-1.0), (center + half_width).min(1.0));
        if lo >= hi {
            return Err(invalid("truncated gaussian support misses [-1, 1]"));
        }
        let unnormalized = Atom::TruncGauss { center, sigma, half_width, skewed, scale: 1.0 };
        let mass = unnormalized.moments(1, 0.0)[0].re;
        Ok(Atom::TruncGauss { center, sigma, half_width, skewed, scale: 1.0 / mass })
    }

    pub fn rect(alpha: f64, beta: f64) -> Result<Self> {
        if !(-1.0 <= alpha && alpha < beta && beta <= 1.0) {
            return Err(invalid(format!("rect atom needs -1 <= alpha < beta <= 1, got [{alpha}, {beta}]")));
        }
        Ok(Atom::Rect { alpha, beta })
    }

    pub fn is_dirac(&self) -> bool {
        matches!(self, Atom::Dirac { .. })
    }

    /// Support `[lo, hi]`; a single point for Dirac atoms.
    pub fn support(&self) -> (f64, f64) {
        match *self {
            Atom::Dirac { location } => (location, location),
            Atom::TruncGauss { center, half_width, .. } => {
                ((center - half_width).max(-1.0), (center + half_width).min(1.0))
            }
            Atom::Rect { alpha, beta } => (alpha, beta),
        }
    }

    /// Density value; zero for Dirac atoms.
    pub fn density(&self, xi: f64) -> f64 {
        let (lo, hi) = self.support();
        match *self {
            Atom::Dirac { .. } => 0.0,
            _ if xi < lo || xi > hi => 0.0,
            Atom::TruncGauss { center, sigma, skewed, scale, .. } => {
                let d = (xi - center) / sigma;
                let k = scale * (-0.5 * d * d).exp();
                if skewed {
                    k / (1.0 - xi * xi).sqrt()
                } else {
                    k
                }
            }
            Atom::Rect { alpha, beta } => 1.0 / (beta - alpha),
        }
    }

    /// `∫ψ(ξ) e^{jπνkξ} dξ` for `k = 0..m`.
    pub fn moments(&self, m: usize, nu: f64) -> Vec<C64> {
        match *self {
            Atom::Dirac { location } => (0..m).map(|k| C64::from_polar(1.0, PI * nu * k as f64 * location)).collect(),
            Atom::Rect { alpha, beta } => (0..m).map(|k| rect_lag(alpha, beta, k, nu) / (beta - alpha)).collect(),
            Atom::TruncGauss { center, sigma, skewed, scale, .. } => {
                let (lo, hi) = self.support();
                let kernel = move |x: f64| {
                    let d = (x - center) / sigma;
                    scale * (-0.5 * d * d).exp()
                };
                let mut out = if skewed {
                    // ξ = sin θ turns J(ξ) dξ into dθ.
                    lag_moments(|t| kernel(t.sin()), f64::sin, lo.asin(), hi.asin(), m, nu)
                } else {
                    lag_moments(kernel, |x| x, lo, hi, m, nu)
                };
                if let Some(l0) = out.first_mut() {
                    l0.im = 0.0;
                }
                out
            }
        }
    }
}

/// First column of `S_i^{(ν)} = ∫ψ_i(ξ) a(νξ) a(νξ)^H dξ`.
pub fn atom_moment_column(atom: &Atom, m: usize, nu: f64) -> Vec<C64> {
    atom.moments(m, nu)
}

/// `G` Dirac atoms at the cell centers `−1 + (2i − 1)/G`.
pub fn dirac_grid(g: usize) -> Vec<Atom> {
    (1..=g).map(|i| Atom::Dirac { location: -1.0 + (2 * i - 1) as f64 / g as f64 }).collect()
}

/// `G` skewed truncated Gaussians with half-width `4/(G+3)`, `σ` a third of
/// that, centered at `−1 + 2(i+1)/(G+3)`.
pub fn gaussian_family(g: usize) -> Vec<Atom> {
    let h = 4.0 / (g as f64 + 3.0);
    (1..=g)
        .map(|i| {
            let center = -1.0 + 2.0 * (i + 1) as f64 / (g as f64 + 3.0);
            Atom::trunc_gauss(center, h / 3.0, h, true).expect("family atoms lie inside [-1, 1]")
        })
        .collect()
}

type ColumnCache = HashMap<(usize, u64), Arc<Vec<Vec<C64>>>>;

/// An ordered atom family with moment columns cached per `(M, ν)`.
#[derive(Debug)]
pub struct Dictionary {
    atoms: Vec<Atom>,
    cache: RwLock<ColumnCache>,
}

impl Dictionary {
    pub fn new(atoms: Vec<Atom>) -> Self {
        Self { atoms, cache: RwLock::new(HashMap::new()) }
    }

    pub fn dirac(g: usize) -> Self {
        Self::new(dirac_grid(g))
    }

    pub fn gaussian(g: usize) -> Self {
        Self::new(gaussian_family(g))
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Moment columns of every atom at `(m, nu)`.
    pub fn columns(&self, m: usize, nu: f64) -> Arc<Vec<Vec<C64>>> {
        let key = (m, nu.to_bits());
        if let Some(cols) = self.cache.read().expect("cache lock").get(&key) {
            return Arc::clone(cols);
        }
        let cols: Arc<Vec<Vec<C64>>> = Arc::new(self.atoms.iter().map(|a| a.moments(m, nu)).collect());
        self.cache.write().expect("cache lock").entry(key).or_insert(cols).clone()
    }
}

/// Weights `(√M, √(2(M−1)), …, √2)` that turn lag residuals into Frobenius
/// residuals of the Toeplitz matrix.
pub fn toeplitz_weights(m: usize) -> Vec<f64> {
    (0..m).map(|k| if k == 0 { (m as f64).sqrt() } else { (2.0 * (m - k) as f64).sqrt() }).collect()
}

/// Continuous atoms followed by one Dirac atom per detected spike, their
/// moment columns `Ã`, the lag weights `W` and the Toeplitzized target `σ̃`.
#[derive(Clone, Debug)]
pub struct DesignSystem {
    pub m: usize,
    pub nu: f64,
    dictionary: Arc<Dictionary>,
    spikes: Vec<f64>,
    /// `M × (G + r̂)`.
    pub a_tilde: ComplexMatrix,
    pub weights: Vec<f64>,
    pub sigma_tilde: Vec<C64>,
}

impl DesignSystem {
    pub fn continuous_count(&self) -> usize {
        self.dictionary.len()
    }

    pub fn spike_count(&self) -> usize {
        self.spikes.len()
    }

    pub fn len(&self) -> usize {
        self.a_tilde.cols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spike_locations(&self) -> &[f64] {
        &self.spikes
    }

    pub fn dictionary(&self) -> &Arc<Dictionary> {
        &self.dictionary
    }

    /// Atom `i` in design order.
    pub fn atom(&self, i: usize) -> Atom {
        let g = self.continuous_count();
        if i < g {
            self.dictionary.atoms()[i]
        } else {
            Atom::Dirac { location: self.spikes[i - g] }
        }
    }

    pub fn all_dirac(&self) -> bool {
        self.dictionary.atoms().iter().all(Atom::is_dirac)
    }

    /// Locations of every atom when the system is all-Dirac.
    pub fn dirac_locations(&self) -> Option<Vec<f64>> {
        (0..self.len())
            .map(|i| match self.atom(i) {
                Atom::Dirac { location } => Some(location),
                _ => None,
            })
            .collect()
    }

    /// `[Re(WÃ); Im(WÃ)]` and `[Re(Wσ̃); Im(Wσ̃)]`.
    pub fn real_stacked(&self) -> (DMatrix<f64>, DVector<f64>) {
        let (m, k) = (self.m, self.len());
        let mut a = DMatrix::zeros(2 * m, k);
        let mut f = DVector::zeros(2 * m);
        for r in 0..m {
            let w = self.weights[r];
            for c in 0..k {
                let z = self.a_tilde[(r, c)] * w;
                a[(r, c)] = z.re;
                a[(m + r, c)] = z.im;
            }
            let t = self.sigma_tilde[r] * w;
            f[r] = t.re;
            f[m + r] = t.im;
        }
        (a, f)
    }

    /// `‖W(Ãu − σ̃)‖`.
    pub fn weighted_residual(&self, u: &[f64]) -> f64 {
        let lags = self.lags(u);
        lags.iter()
            .zip(&self.sigma_tilde)
            .zip(&self.weights)
            .map(|((l, s), w)| (w * (l - s)).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// `Ãu`.
    pub fn lags(&self, u: &[f64]) -> Vec<C64> {
        (0..self.m)
            .map(|r| u.iter().enumerate().map(|(c, &x)| self.a_tilde[(r, c)] * x).sum())
            .collect()
    }

    /// Moment columns of every design atom at `nu`.
    pub fn columns_at(&self, nu: f64) -> Vec<Vec<C64>> {
        let mut cols = self.dictionary.columns(self.m, nu).as_ref().clone();
        cols.extend(self.spikes.iter().map(|&p| Atom::Dirac { location: p }.moments(self.m, nu)));
        cols
    }
}

/// Builds the design for `dictionary` plus spike atoms against `Σ̂_h`.
pub fn assemble_design(
    dictionary: Arc<Dictionary>,
    spike_locations: &[f64],
    sigma_h: &ComplexMatrix,
    nu: f64,
) -> Result<DesignSystem> {
    let m = sigma_h.ensure_square()?;
    if !(nu > 0.0 && nu.is_finite()) {
        return Err(invalid(format!("nu must be positive, got {nu}")));
    }
    if let Some(p) = spike_locations.iter().find(|p| !(-1.0..1.0).contains(*p)) {
        return Err(invalid(format!("spike location {p} outside [-1, 1)")));
    }
    if dictionary.is_empty() && spike_locations.is_empty() {
        return Err(invalid("design needs at least one atom"));
    }
    let (_, sigma_tilde) = toeplitz_project(sigma_h)?;
    let mut system = DesignSystem {
        m,
        nu,
        dictionary,
        spikes: spike_locations.to_vec(),
        a_tilde: ComplexMatrix::zeros(m, 0),
        weights: toeplitz_weights(m),
        sigma_tilde,
    };
    let cols = system.columns_at(nu);
    let mut a = ComplexMatrix::zeros(m, cols.len());
    for (c, col) in cols.iter().enumerate() {
        a.set_column(c, col);
    }
    system.a_tilde = a;
    Ok(system)
}

/// `Σ^{(ν_out)} = Σ_i u_i S_i^{(ν_out)}`, assembled as a Hermitian Toeplitz matrix.
pub fn reconstruct_covariance(system: &DesignSystem, u: &[f64], nu_out: f64) -> Result<ComplexMatrix> {
    if u.len() != system.len() {
        return Err(Error::DimensionMismatch(format!("u has {} entries, design has {}", u.len(), system.len())));
    }
    if !(nu_out > 0.0 && nu_out.is_finite()) {
        return Err(invalid(format!("nu must be positive, got {nu_out}")));
    }
    let lags = if nu_out.to_bits() == system.nu.to_bits() {
        system.lags(u)
    } else {
        let cols = system.columns_at(nu_out);
        (0..system.m).map(|r| u.iter().zip(&cols).map(|(&x, col)| col[r] * x).sum()).collect()
    };
    Ok(ComplexMatrix::hermitian_toeplitz(&lags))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: C64, b: C64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn dirac_grid_centers() {
        let loc = |g| dirac_grid(g).iter().map(|a| a.support().0).collect::<Vec<_>>();
        assert_eq!(loc(2), vec![-0.5, 0.5]);
        assert_eq!(loc(4), vec![-0.75, -0.25, 0.25, 0.75]);
        let l = loc(256);
        assert_eq!(l.len(), 256);
        assert!(l.windows(2).all(|w| (w[1] - w[0] - 1.0 / 128.0).abs() < 1e-14));
    }

    #[test]
    fn gaussian_family_geometry() {
        let fam = gaussian_family(13);
        match fam[0] {
            Atom::TruncGauss { sigma, half_width, .. } => {
                assert!((half_width - 0.25).abs() < 1e-15);
                assert!((sigma - 1.0 / 12.0).abs() < 1e-15);
            }
            _ => unreachable!(),
        }
        for g in [2, 5, 40] {
            let fam = gaussian_family(g);
            for w in fam.windows(2) {
                assert!(w[0].support().1 > w[1].support().0);
            }
        }
    }

    #[test]
    fn unit_mass_for_every_atom() {
        let mut atoms = gaussian_family(7);
        atoms.extend(gaussian_family(64));
        atoms.push(Atom::trunc_gauss(0.9, 0.1, 0.3, false).unwrap());
        atoms.push(Atom::rect(-0.3, 0.1).unwrap());
        atoms.extend(dirac_grid(3));
        for a in &atoms {
            for nu in [1.0, 2.1 / 1.9] {
                assert!((a.moments(4, nu)[0].re - 1.0).abs() < 1e-8, "{a:?}");
            }
        }
    }

    #[test]
    fn skewed_mass_matches_direct_integration() {
        // Midpoint rule in ξ on an interior atom where J is bounded.
        let a = Atom::trunc_gauss(0.5, 0.05, 0.15, true).unwrap();
        let (lo, hi) = a.support();
        let n = 200_000;
        let h = (hi - lo) / n as f64;
        let mass: f64 = (0..n).map(|i| a.density(lo + (i as f64 + 0.5) * h) * h).sum();
        assert!((mass - 1.0).abs() < 1e-8);
        let lag1: C64 = (0..n)
            .map(|i| {
                let x = lo + (i as f64 + 0.5) * h;
                C64::from_polar(a.density(x) * h, PI * x)
            })
            .sum();
        assert!(close(lag1, a.moments(2, 1.0)[1], 1e-8));
    }

    #[test]
    fn moment_column_examples() {
        let c = atom_moment_column(&Atom::Dirac { location: 0.0 }, 5, 1.7);
        assert!(c.iter().all(|z| close(*z, C64::new(1.0, 0.0), 1e-15)));
        let c = atom_moment_column(&Atom::Dirac { location: 0.4 }, 3, 1.0);
        assert!(close(c[1], C64::from_polar(1.0, 0.4 * PI), 1e-15));
        assert!(close(c[2], C64::from_polar(1.0, 0.8 * PI), 1e-15));
        let c = atom_moment_column(&Atom::rect(0.0, 0.6).unwrap(), 2, 1.0);
        let want = (C64::from_polar(1.0, 0.6 * PI) - 1.0) / C64::new(0.0, 0.6 * PI);
        assert!(close(c[1], want, 1e-15));
        let quad = lag_moments(|_| 1.0 / 0.6, |x| x, 0.0, 0.6, 2, 1.0);
        assert!(close(c[1], quad[1], 1e-12));
    }

    #[test]
    fn gaussian_atoms_approach_diracs() {
        let m = 16;
        let mut prev = f64::INFINITY;
        for g in [64, 256, 1024] {
            let fam = gaussian_family(g);
            let a = fam[g / 3];
            let center = match a {
                Atom::TruncGauss { center, .. } => center,
                _ => unreachable!(),
            };
            let d = Atom::Dirac { location: center }.moments(m, 1.0);
            let dist: f64 = a.moments(m, 1.0).iter().zip(&d).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
            assert!(dist < prev, "G={g}: {dist} !< {prev}");
            prev = dist;
        }
    }

    #[test]
    fn design_examples() {
        let s = ComplexMatrix::from_fn(3, 3, |_, _| C64::new(1.0, 0.0));
        let sys = assemble_design(Arc::new(Dictionary::new(vec![Atom::Dirac { location: 0.0 }])), &[], &s, 1.0)
            .unwrap();
        assert!(sys.a_tilde.data().iter().all(|z| close(*z, C64::new(1.0, 0.0), 1e-15)));
        let w = &sys.weights;
        assert!((w[0] - 3f64.sqrt()).abs() < 1e-15 && (w[1] - 2.0).abs() < 1e-15 && (w[2] - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(sys.sigma_tilde, s.column(0));
        assert!(assemble_design(Arc::new(Dictionary::dirac(2)), &[1.0], &s, 1.0).is_err());
    }

    #[test]
    fn spikes_follow_continuous_atoms() {
        let s = ComplexMatrix::identity(4);
        let sys = assemble_design(Arc::new(Dictionary::gaussian(5)), &[-0.2, 0.4], &s, 1.0).unwrap();
        assert_eq!(sys.len(), 7);
        assert_eq!(sys.atom(5), Atom::Dirac { location: -0.2 });
        assert!(!sys.all_dirac());
    }

    #[test]
    fn weighted_residual_is_toeplitz_frobenius_distance() {
        let s = crate::channel::asf_covariance(&crate::channel::two_spike_two_rect_scene(), 6, 1.0).unwrap();
        let sys = assemble_design(Arc::new(Dictionary::dirac(12)), &[], &s, 1.0).unwrap();
        let u: Vec<f64> = (0..12).map(|i| 0.05 * i as f64).collect();
        let recon = reconstruct_covariance(&sys, &u, 1.0).unwrap();
        let want = recon.sub(&s).unwrap().frobenius_norm();
        assert!((sys.weighted_residual(&u) - want).abs() < 1e-12);
        let (a, f) = sys.real_stacked();
        let r = &a * DVector::from_vec(u.clone()) - f;
        assert!((r.norm() - want).abs() < 1e-12);
    }

    #[test]
    fn reconstruction_examples() {
        let s = ComplexMatrix::identity(5);
        let sys = assemble_design(Arc::new(Dictionary::dirac(4)), &[0.1], &s, 1.0).unwrap();
        let mut u = vec![0.0; 5];
        u[1] = 1.0;
        let r = reconstruct_covariance(&sys, &u, 1.0).unwrap();
        let want = ComplexMatrix::hermitian_toeplitz(&Atom::Dirac { location: -0.25 }.moments(5, 1.0));
        assert_eq!(r, want);

        let nu = 2.1 / 1.9;
        let r = reconstruct_covariance(&sys, &u, nu).unwrap();
        for k in 0..5 {
            assert!(close(r[(k, 0)], C64::from_polar(1.0, PI * nu * k as f64 * -0.25), 1e-14));
        }
        let u: Vec<f64> = vec![0.3, 0.1, 0.0, 2.0, 0.7];
        let r = reconstruct_covariance(&sys, &u, 1.0).unwrap();
        assert!((r.trace().re - 5.0 * u.iter().sum::<f64>()).abs() < 1e-12);
        assert!(reconstruct_covariance(&sys, &u[..4], 1.0).is_err());
    }

    #[test]
    fn cache_returns_same_columns() {
        let d = Dictionary::gaussian(9);
        let a = d.columns(8, 1.0);
        let b = d.columns(8, 1.0);
        assert!(Arc::ptr_eq(&a, &b));
        assert_eq!(a[3], d.atoms()[3].moments(8, 1.0));
    }
}
