//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use asfcov::linalg::{ComplexMatrix, C64};
use nalgebra::{DMatrix, DVector};

/// Best feasible point over all 2^n passive sets.
pub fn brute_force_nnls(a: &DMatrix<f64>, f: &DVector<f64>) -> Vec<f64> {
    let n = a.ncols();
    let mut best = (f.norm(), vec![0.0; n]);
    for mask in 1u32..(1 << n) {
        let idx: Vec<usize> = (0..n).filter(|j| mask & (1 << j) != 0).collect();
        let sub = DMatrix::from_fn(a.nrows(), idx.len(), |r, c| a[(r, idx[c])]);
        let Ok(z) = sub.clone().svd(true, true).solve(f, 1e-14) else { continue };
        if z.iter().all(|&v| v >= 0.0) {
            let r = (&sub * &z - f).norm();
            if r < best.0 {
                let mut x = vec![0.0; n];
                for (k, &j) in idx.iter().enumerate() {
                    x[j] = z[k];
                }
                best = (r, x);
            }
        }
    }
    best.1
}

/// Nearest `[[d, b̄], [b, d]]` with `d ≥ |b|` to `A`: an outer zooming scan
/// over `d`, and for each `d` an inner zooming scan over `b = r·e^{jθ}`
/// restricted to the disc `r ≤ d`.
pub fn brute_force_2x2(a: &ComplexMatrix) -> ComplexMatrix {
    let (a00, a11, a10, a01) = (a[(0, 0)], a[(1, 1)], a[(1, 0)], a[(0, 1)]);
    let cost = |d: f64, b: C64| {
        (C64::new(d, 0.0) - a00).norm_sqr() + (C64::new(d, 0.0) - a11).norm_sqr() + (b - a10).norm_sqr()
            + (b.conj() - a01).norm_sqr()
    };
    let pts = 32;
    let inner = |d: f64| -> (f64, C64) {
        let (mut r0, mut r1) = (0.0, d);
        let (mut t0, mut t1) = (-std::f64::consts::PI, std::f64::consts::PI);
        let mut best = (cost(d, C64::new(0.0, 0.0)), 0.0, 0.0);
        for _ in 0..20 {
            for i in 0..=pts {
                let r = r0 + (r1 - r0) * i as f64 / pts as f64;
                for k in 0..=pts {
                    let th = t0 + (t1 - t0) * k as f64 / pts as f64;
                    let c = cost(d, C64::from_polar(r, th));
                    if c < best.0 {
                        best = (c, r, th);
                    }
                }
            }
            let (wr, wt) = ((r1 - r0) / 8.0, (t1 - t0) / 8.0);
            (r0, r1) = ((best.1 - wr).max(0.0), (best.1 + wr).min(d));
            (t0, t1) = (best.2 - wt, best.2 + wt);
        }
        (best.0, C64::from_polar(best.1, best.2))
    };
    let scale = a.frobenius_norm().max(1e-12);
    let (mut d0, mut d1) = (0.0, 2.0 * scale);
    let mut best = (f64::INFINITY, 0.0, C64::new(0.0, 0.0));
    for _ in 0..20 {
        for i in 0..=pts {
            let d = d0 + (d1 - d0) * i as f64 / pts as f64;
            let (c, b) = inner(d);
            if c < best.0 {
                best = (c, d, b);
            }
        }
        let w = (d1 - d0) / 8.0;
        (d0, d1) = ((best.1 - w).max(0.0), best.1 + w);
    }
    let (d, b) = (C64::new(best.1, 0.0), best.2);
    ComplexMatrix::from_vec(2, 2, vec![d, b.conj(), b, d]).unwrap()
}

/// SPICE objective written out densely, independent of the library.
pub fn spice_objective(r: &DMatrix<C64>, d: &DMatrix<C64>, u: &[f64], eps: f64, many: bool) -> f64 {
    let m = r.nrows();
    let mut s = DMatrix::<C64>::identity(m, m) * C64::new(eps, 0.0);
    for (i, &w) in u.iter().enumerate() {
        let a = d.column(i);
        s += &a * a.adjoint() * C64::new(w, 0.0);
    }
    let sinv = s.clone().try_inverse().unwrap();
    let diff = r - &s;
    if many {
        let rinv = r.clone().try_inverse().unwrap();
        (&sinv * &diff * &rinv * &diff).trace().re
    } else {
        (&diff * &sinv * &diff).trace().re
    }
}

pub fn to_na(m: &ComplexMatrix) -> DMatrix<C64> {
    DMatrix::from_fn(m.rows(), m.cols(), |r, c| m[(r, c)])
}

/// Cyclic coordinate descent with golden-section line minimization.
pub fn coordinate_descent(f: impl Fn(&[f64]) -> f64, n: usize, hi: f64) -> (Vec<f64>, f64) {
    let mut u = vec![hi / (4.0 * n as f64); n];
    let mut best = f(&u);
    for _sweep in 0..400 {
        let prev = best;
        for i in 0..n {
            let (mut lo, mut up) = (0.0, hi);
            let g = (5f64.sqrt() - 1.0) / 2.0;
            let eval = |x: f64, u: &mut Vec<f64>| {
                u[i] = x;
                f(u)
            };
            let mut x1 = up - g * (up - lo);
            let mut x2 = lo + g * (up - lo);
            let mut f1 = eval(x1, &mut u);
            let mut f2 = eval(x2, &mut u);
            while up - lo > 1e-12 {
                if f1 < f2 {
                    up = x2;
                    x2 = x1;
                    f2 = f1;
                    x1 = up - g * (up - lo);
                    f1 = eval(x1, &mut u);
                } else {
                    lo = x1;
                    x1 = x2;
                    f1 = f2;
                    x2 = lo + g * (up - lo);
                    f2 = eval(x2, &mut u);
                }
            }
            let cands = [0.0, 0.5 * (lo + up)];
            let (x, fx) = cands
                .iter()
                .map(|&x| (x, eval(x, &mut u)))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            u[i] = x;
            best = fx;
        }
        if prev - best <= 1e-14 * best.abs().max(1e-300) {
            break;
        }
    }
    (u, best)
}

