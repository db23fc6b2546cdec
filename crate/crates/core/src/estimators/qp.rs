use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use crate::dictionary::{Atom, DesignSystem};
use crate::error::{invalid, Result};
use crate::estimators::EstimatorReport;

#[derive(Clone, Debug, PartialEq)]
pub struct QpOptions {
    /// Points of the cell-centered grid where `Ψ̃b ≥ 0` is enforced.
    pub grid_size: usize,
    pub rho: f64,
    pub alpha: f64,
    pub sigma: f64,
    pub eps_abs: f64,
    pub eps_rel: f64,
    pub max_iter: usize,
    pub polish: bool,
}

impl Default for QpOptions {
    fn default() -> Self {
        Self {
            grid_size: 10_000,
            rho: 1.0,
            alpha: 1.6,
            sigma: 1e-6,
            eps_abs: 1e-6,
            eps_rel: 1e-4,
            max_iter: 20_000,
            polish: true,
        }
    }
}

/// Sparse constraint rows `Cx ≥ 0`.
struct Rows {
    rows: Vec<Vec<(usize, f64)>>,
    n: usize,
}

impl Rows {
    fn mul(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.rows.len(), self.rows.iter().map(|r| r.iter().map(|&(j, v)| v * x[j]).sum()))
    }

    fn mul_t(&self, y: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.n);
        for (r, &yi) in self.rows.iter().zip(y.iter()) {
            if yi != 0.0 {
                for &(j, v) in r {
                    out[j] += v * yi;
                }
            }
        }
        out
    }

    fn gram(&self, subset: impl Iterator<Item = usize>) -> DMatrix<f64> {
        let mut g = DMatrix::zeros(self.n, self.n);
        for i in subset {
            let r = &self.rows[i];
            for &(a, va) in r {
                for &(b, vb) in r {
                    g[(a, b)] += va * vb;
                }
            }
        }
        g
    }
}

/// Nonnegativity rows: density samples of the non-Dirac atoms on a
/// cell-centered grid, plus `u_j ≥ 0` for every Dirac atom.
fn constraint_rows(system: &DesignSystem, grid_size: usize) -> Vec<Vec<(usize, f64)>> {
    let atoms: Vec<Atom> = (0..system.len()).map(|i| system.atom(i)).collect();
    let continuous: Vec<usize> = (0..atoms.len()).filter(|&j| !atoms[j].is_dirac()).collect();
    let mut rows = Vec::new();
    if !continuous.is_empty() {
        for i in 1..=grid_size {
            let xi = -1.0 + (2 * i - 1) as f64 / grid_size as f64;
            let row: Vec<(usize, f64)> = continuous
                .iter()
                .filter_map(|&j| {
                    let v = atoms[j].density(xi);
                    (v > 0.0 && v.is_finite()).then_some((j, v))
                })
                .collect();
            if !row.is_empty() {
                rows.push(row);
            }
        }
    }
    for (j, a) in atoms.iter().enumerate() {
        if a.is_dirac() {
            rows.push(vec![(j, 1.0)]);
        }
    }
    rows
}

/// Weighted Toeplitz fit with `c ≥ 0` on spike and Dirac atoms and a
/// nonnegative mixture `Ψ̃b ≥ 0` on the constraint grid.
///
/// Solved by ADMM (operator splitting with over-relaxation and adaptive
/// penalty) on a diagonally scaled problem, followed by an active-set polish.
pub fn estimate_qp(system: &DesignSystem, opts: &QpOptions) -> Result<EstimatorReport> {
    let start = Instant::now();
    if opts.grid_size == 0 || opts.max_iter == 0 {
        return Err(invalid("QP needs a positive grid size and iteration cap"));
    }
    let (a, f) = system.real_stacked();
    let n = a.ncols();
    let p_raw = a.transpose() * &a;
    let q_raw = -(a.transpose() * &f);
    let f_sq = f.norm_squared();
    let residual = |u: &DVector<f64>| (f_sq + 2.0 * q_raw.dot(u) + (&p_raw * u).dot(u)).max(0.0).sqrt();

    // Variable scaling u = D x with unit diagonal in the scaled Hessian,
    // then a cost scaling.
    let d = DVector::from_iterator(n, (0..n).map(|j| if p_raw[(j, j)] > 0.0 { 1.0 / p_raw[(j, j)].sqrt() } else { 1.0 }));
    let mut p = DMatrix::from_fn(n, n, |r, c| d[r] * p_raw[(r, c)] * d[c]);
    let mut q = q_raw.component_mul(&d);
    let cost = 1.0 / q.amax().max(1.0);
    p *= cost;
    q *= cost;

    let raw_rows = constraint_rows(system, opts.grid_size);
    let rows = Rows {
        rows: raw_rows
            .iter()
            .map(|r| {
                let scaled: Vec<(usize, f64)> = r.iter().map(|&(j, v)| (j, v * d[j])).collect();
                let norm = scaled.iter().map(|(_, v)| v * v).sum::<f64>().sqrt();
                scaled.into_iter().map(|(j, v)| (j, v / norm)).collect()
            })
            .collect(),
        n,
    };
    let m_rows = rows.rows.len();
    let ctc = rows.gram(0..m_rows);

    let factor = |rho: f64| {
        let mut k = &p + &ctc * rho;
        for i in 0..n {
            k[(i, i)] += opts.sigma;
        }
        k.cholesky()
    };
    let mut rho = opts.rho;
    let mut kkt = factor(rho).ok_or_else(|| invalid("QP system matrix is not positive definite"))?;

    let mut x = DVector::<f64>::zeros(n);
    let mut z = DVector::<f64>::zeros(m_rows);
    let mut y = DVector::<f64>::zeros(m_rows);
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    const CHECK_EVERY: usize = 10;
    const ADAPT_EVERY: usize = 50;

    while iterations < opts.max_iter {
        iterations += 1;
        let rhs = &x * opts.sigma - &q + rows.mul_t(&(&z * rho - &y));
        let x_tilde = kkt.solve(&rhs);
        let z_tilde = rows.mul(&x_tilde);
        x = &x_tilde * opts.alpha + &x * (1.0 - opts.alpha);
        let z_relaxed = &z_tilde * opts.alpha + &z * (1.0 - opts.alpha);
        let z_next = (&z_relaxed + &y / rho).map(|v| v.max(0.0));
        y += (&z_relaxed - &z_next) * rho;
        z = z_next;

        if iterations % CHECK_EVERY == 0 || iterations == opts.max_iter {
            let cx = rows.mul(&x);
            let px = &p * &x;
            let cty = rows.mul_t(&y);
            let prim = (&cx - &z).amax();
            let dual = (&px + &q + &cty).amax();
            let prim_scale = cx.amax().max(z.amax());
            let dual_scale = px.amax().max(cty.amax()).max(q.amax());
            trace.push(residual(&x.component_mul(&d)));
            if prim <= opts.eps_abs + opts.eps_rel * prim_scale && dual <= opts.eps_abs + opts.eps_rel * dual_scale {
                converged = true;
                break;
            }
            if iterations % ADAPT_EVERY == 0 {
                let ratio = ((prim / prim_scale.max(1e-30)) / (dual / dual_scale.max(1e-30)).max(1e-30)).sqrt();
                let proposed = (rho * ratio).clamp(1e-6, 1e6);
                if proposed > 5.0 * rho || proposed < 0.2 * rho {
                    if let Some(k) = factor(proposed) {
                        rho = proposed;
                        kkt = k;
                    }
                }
            }
        }
    }
    if !converged {
        log::warn!("QP ADMM stopped at the iteration cap ({iterations})");
    }

    let objective = |x: &DVector<f64>| 0.5 * (&p * x).dot(x) + q.dot(x);
    if opts.polish {
        if let Some(xp) = polish(&p, &q, &rows, &z, &y) {
            let floor = -1e-9 * xp.amax().max(1.0);
            let feasible = rows.mul(&xp).iter().all(|&v| v >= floor);
            if feasible && objective(&xp) <= objective(&x) + 1e-9 * objective(&x).abs().max(1.0) {
                x = xp;
            } else {
                log::debug!("QP polish rejected");
            }
        }
    }

    let mut u = x.component_mul(&d);
    restore_feasibility(&mut u, &raw_rows, system);
    trace.push(residual(&u));
    Ok(EstimatorReport::new(system, u.as_slice().to_vec(), trace, iterations, converged, start))
}

/// Minimizes the quadratic on the null space of the constraints that ADMM
/// reports as active.
fn polish(p: &DMatrix<f64>, q: &DVector<f64>, rows: &Rows, z: &DVector<f64>, y: &DVector<f64>) -> Option<DVector<f64>> {
    let n = p.ncols();
    let active: Vec<usize> = (0..z.len()).filter(|&i| z[i] < -y[i]).collect();
    let basis = if active.is_empty() {
        DMatrix::identity(n, n)
    } else {
        let g = rows.gram(active.iter().copied());
        let eig = g.symmetric_eigen();
        let top = eig.eigenvalues.amax();
        let keep: Vec<usize> = (0..n).filter(|&i| eig.eigenvalues[i] <= 1e-10 * top).collect();
        if keep.is_empty() {
            return Some(DVector::zeros(n));
        }
        DMatrix::from_fn(n, keep.len(), |r, c| eig.eigenvectors[(r, keep[c])])
    };
    let h = basis.transpose() * p * &basis;
    let g = basis.transpose() * q;
    let dim = h.ncols();
    let eig = h.symmetric_eigen();
    let top = eig.eigenvalues.amax();
    if !(top > 0.0) {
        return None;
    }
    let mut w = DVector::zeros(dim);
    for (i, &l) in eig.eigenvalues.iter().enumerate() {
        if l > 1e-12 * top {
            let v = eig.eigenvectors.column(i);
            w -= v * (v.dot(&g) / l);
        }
    }
    let x = basis * w;
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Clamps Dirac coefficients at zero and lifts the continuous block by the
/// smallest multiple of the all-ones vector that makes every grid sample
/// nonnegative. A no-op on feasible points.
fn restore_feasibility(u: &mut DVector<f64>, rows: &[Vec<(usize, f64)>], system: &DesignSystem) {
    for j in 0..u.len() {
        if system.atom(j).is_dirac() && u[j] < 0.0 {
            u[j] = 0.0;
        }
    }
    let mut lift = 0.0f64;
    for r in rows {
        if r.len() == 1 && system.atom(r[0].0).is_dirac() {
            continue;
        }
        let s: f64 = r.iter().map(|&(j, v)| v * u[j]).sum();
        let t: f64 = r.iter().map(|&(_, v)| v).sum();
        if s < 0.0 && t > 0.0 {
            lift = lift.max(-s / t);
        }
    }
    if lift > 0.0 {
        log::debug!("QP feasibility lift {lift:e}");
        for j in 0..u.len() {
            if !system.atom(j).is_dirac() {
                u[j] += lift;
            }
        }
    }
}
