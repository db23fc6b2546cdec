use nalgebra::{DMatrix, DVector};

use crate::benchmarks::{BenchmarkReport, DiscreteMeasure};
use crate::dictionary::DesignSystem;
use crate::error::{invalid, Error, Result};
use crate::linalg::{from_nalgebra, to_nalgebra, ComplexMatrix, C64};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpiceOptions {
    /// Stop when the scaled projected-gradient residual falls to this level.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SpiceOptions {
    fn default() -> Self {
        Self { tol: 1e-9, max_iter: 2000 }
    }
}

const ARMIJO: f64 = 1e-4;
const MAX_HALVINGS: usize = 60;

enum Branch {
    /// `‖Σ^{-1/2}(R − Σ)‖²`.
    Few,
    /// `‖Σ^{-1/2}(R − Σ)R^{-1/2}‖²`, with `R⁻¹` precomputed.
    Many(DMatrix<C64>),
}

struct Problem<'a> {
    d: &'a DMatrix<C64>,
    r: DMatrix<C64>,
    eps: f64,
    branch: Branch,
}

struct Eval {
    f: f64,
    g: DVector<f64>,
    h: DMatrix<f64>,
}

impl Problem<'_> {
    fn sigma(&self, u: &DVector<f64>) -> DMatrix<C64> {
        let m = self.d.nrows();
        let mut s = DMatrix::<C64>::zeros(m, m);
        for (i, &w) in u.iter().enumerate() {
            if w != 0.0 {
                let a = self.d.column(i);
                s += (&a * a.adjoint()) * C64::new(w, 0.0);
            }
        }
        for i in 0..m {
            s[(i, i)] += self.eps;
        }
        s
    }

    fn objective(&self, u: &DVector<f64>) -> Option<f64> {
        let m = self.d.nrows() as f64;
        let sigma = self.sigma(u);
        let chol = sigma.clone().cholesky()?;
        let sinv_r = chol.solve(&self.r);
        Some(match &self.branch {
            Branch::Few => (&self.r * &sinv_r).trace().re - 2.0 * self.r.trace().re + sigma.trace().re,
            Branch::Many(rinv) => sinv_r.trace().re - 2.0 * m + (rinv * &sigma).trace().re,
        })
    }

    /// Objective, gradient and Hessian. With `P = Σ⁻¹` and `Q = P R̃ P`
    /// (`R̃ = R²` or `R`), `H_ij = 2 Re[(a_iᴴ P a_j)(a_jᴴ Q a_i)]`.
    fn eval(&self, u: &DVector<f64>) -> Option<Eval> {
        let k = u.len();
        let m = self.d.nrows();
        let f = self.objective(u)?;
        let p = self.sigma(u).cholesky()?.inverse();
        let (q, offset) = match &self.branch {
            Branch::Few => (&p * &self.r * &self.r * &p, DVector::from_element(k, m as f64)),
            Branch::Many(rinv) => {
                let rd = rinv * self.d;
                let off = DVector::from_iterator(k, (0..k).map(|i| self.d.column(i).dotc(&rd.column(i)).re));
                (&p * &self.r * &p, off)
            }
        };
        let b1 = self.d.adjoint() * &p * self.d;
        let b2 = self.d.adjoint() * &q * self.d;
        let g = DVector::from_iterator(k, (0..k).map(|i| offset[i] - b2[(i, i)].re));
        let h = DMatrix::from_fn(k, k, |i, j| 2.0 * (b1[(i, j)] * b2[(j, i)]).re);
        Some(Eval { f, g, h })
    }
}

/// `max_i |û_i − max(0, û_i − ĝ_i)|` with `u` and `g` in natural units.
fn kkt_residual(u: &DVector<f64>, g: &DVector<f64>, u_scale: f64, g_scale: f64) -> f64 {
    u.iter()
        .zip(g.iter())
        .map(|(&ui, &gi)| {
            let (x, y) = (ui / u_scale, gi / g_scale);
            (x - (x - y).max(0.0)).abs()
        })
        .fold(0.0, f64::max)
}

/// Newton direction on the free coordinates, zero on the active ones.
fn newton_direction(ev: &Eval, free: &[usize]) -> DVector<f64> {
    let k = ev.g.len();
    let mut d = DVector::zeros(k);
    if free.is_empty() {
        return d;
    }
    let hf = DMatrix::from_fn(free.len(), free.len(), |a, b| ev.h[(free[a], free[b])]);
    let gf = DVector::from_iterator(free.len(), free.iter().map(|&i| -ev.g[i]));
    let top = hf.diagonal().amax().max(1e-300);
    let mut lambda = 1e-12 * top;
    for _ in 0..12 {
        let mut reg = hf.clone();
        for i in 0..free.len() {
            reg[(i, i)] += lambda;
        }
        if let Some(ch) = reg.cholesky() {
            let sol = ch.solve(&gf);
            for (a, &i) in free.iter().enumerate() {
                d[i] = sol[a];
            }
            return d;
        }
        lambda *= 100.0;
    }
    d
}

/// Armijo search along the projection arc `max(0, u + s d)`.
fn arc_search(prob: &Problem, u: &DVector<f64>, f: f64, g: &DVector<f64>, d: &DVector<f64>, mut s: f64) -> Option<(DVector<f64>, f64)> {
    for _ in 0..MAX_HALVINGS {
        let cand = (u + d * s).map(|v| v.max(0.0));
        let delta = &cand - u;
        let slope = g.dot(&delta);
        if slope < 0.0 {
            if let Some(fc) = prob.objective(&cand) {
                if fc <= f + ARMIJO * slope {
                    return Some((cand, fc));
                }
            }
        }
        s *= 0.5;
    }
    None
}

/// SPICE covariance fit on an all-Dirac design, by projected Newton steps
/// on `u ≥ 0` with a projected-gradient fallback.
///
/// The `N ≥ M` weighting by `Σ̂_y^{-1/2}` is used when `n >= M` and `Σ̂_y`
/// is invertible; otherwise the `N < M` objective is used and flagged.
pub fn spice(sigma_y: &ComplexMatrix, system: &DesignSystem, n: usize, opts: &SpiceOptions) -> Result<BenchmarkReport> {
    let m = sigma_y.ensure_square()?;
    if m != system.m {
        return Err(Error::DimensionMismatch(format!("Σ̂_y is {m}x{m}, design has M = {}", system.m)));
    }
    let locations = system.dirac_locations().ok_or_else(|| invalid("SPICE needs an all-Dirac design"))?;
    let r = to_nalgebra(&sigma_y.symmetrized()?);
    let eps = 1e-8 * r.trace().re / m as f64;
    if !(eps > 0.0) {
        return Err(invalid("SPICE needs a nonzero sample covariance"));
    }
    let mut flags = Vec::new();
    let branch = if n >= m {
        match r.clone().cholesky() {
            Some(ch) => Branch::Many(ch.inverse()),
            None => {
                log::warn!("SPICE: Σ̂_y is singular, falling back to the N < M objective");
                flags.push("singular-sample-covariance-fallback".to_string());
                Branch::Few
            }
        }
    } else {
        Branch::Few
    };
    let u_scale = r.trace().re / m as f64;
    let g_scale = match branch {
        Branch::Few => m as f64,
        Branch::Many(_) => m as f64 / u_scale,
    };
    let d = to_nalgebra(&system.a_tilde);
    let prob = Problem { d: &d, r, eps, branch };

    let k = system.len();
    let mut u = DVector::from_iterator(
        k,
        (0..k).map(|i| {
            let a = d.column(i);
            a.dotc(&(&prob.r * a)).re.max(0.0) / (m * m) as f64
        }),
    );
    let singular = || Error::Singular("SPICE model covariance".into());
    let mut ev = prob.eval(&u).ok_or_else(singular)?;
    let mut trace = vec![ev.f];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        let kkt = kkt_residual(&u, &ev.g, u_scale, g_scale);
        if kkt <= opts.tol {
            converged = true;
            break;
        }
        iterations += 1;
        let near = (1e-3 * u_scale).min(kkt * u_scale);
        let free: Vec<usize> = (0..k).filter(|&i| !(u[i] <= near && ev.g[i] > 0.0)).collect();
        let dir = newton_direction(&ev, &free);
        let step = arc_search(&prob, &u, ev.f, &ev.g, &dir, 1.0).or_else(|| {
            let pg = -&ev.g * (u_scale / g_scale);
            arc_search(&prob, &u, ev.f, &ev.g, &pg, 1.0)
        });
        let Some((next, _)) = step else {
            log::debug!("SPICE: line search stalled at KKT residual {kkt:e}");
            converged = kkt <= opts.tol.sqrt();
            break;
        };
        u = next;
        ev = prob.eval(&u).ok_or_else(singular)?;
        trace.push(ev.f);
    }
    if !converged {
        log::warn!("SPICE stopped after {iterations} iterations without meeting the KKT tolerance");
    }

    let mut cov = prob.sigma(&u);
    for i in 0..m {
        cov[(i, i)] -= eps;
    }
    let covariance = from_nalgebra(&cov).symmetrized()?;
    let weights = u.as_slice().to_vec();
    Ok(BenchmarkReport {
        method: "spice".into(),
        covariance,
        iterations,
        residual: ev.f,
        converged,
        trace,
        measure: Some(DiscreteMeasure { locations, weights }),
        flags,
    })
}
