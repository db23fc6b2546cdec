//! Cyclic complex Jacobi eigensolver for Hermitian matrices.
//!
//! Each rotation first removes the phase of the pivot `a_pq` with a diagonal
//! unitary, then applies a real Givens rotation to the resulting real 2x2
//! block. Sweeps run over all `(p, q)` pairs until the largest off-diagonal
//! magnitude drops below `1e-12 · ‖A‖_F`.

use crate::error::{Error, Result};
use crate::linalg::matrix::{ComplexMatrix, C64};

const MAX_SWEEPS: usize = 64;
const OFFDIAG_TOL: f64 = 1e-12;

/// Full eigendecomposition of a Hermitian matrix.
///
/// Eigenvalues are sorted in descending order; column `k` of `eigenvectors`
/// pairs with `eigenvalues[k]`. Each eigenvector is phase-normalized so that
/// its first non-negligible entry is real and positive.
#[derive(Clone, Debug)]
pub struct HermitianEig {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: ComplexMatrix,
}

impl HermitianEig {
    /// `V diag(f(λ)) V^H`, mirrored so the result is exactly Hermitian.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let v = &self.eigenvectors;
        let n = v.rows();
        let weights: Vec<f64> = self.eigenvalues.iter().map(|&l| f(l)).collect();
        let mut out = ComplexMatrix::zeros(n, n);
        for r in 0..n {
            for c in r..n {
                let mut acc = C64::new(0.0, 0.0);
                for (k, &w) in weights.iter().enumerate() {
                    if w != 0.0 {
                        acc += v[(r, k)] * v[(c, k)].conj() * w;
                    }
                }
                if r == c {
                    out[(r, r)] = C64::new(acc.re, 0.0);
                } else {
                    out[(r, c)] = acc;
                    out[(c, r)] = acc.conj();
                }
            }
        }
        out
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        self.reconstruct_with(|l| l)
    }

    /// The eigenvectors for the `k` smallest eigenvalues, as columns.
    pub fn trailing_vectors(&self, k: usize) -> ComplexMatrix {
        let v = &self.eigenvectors;
        let n = v.cols();
        let start = n - k.min(n);
        ComplexMatrix::from_fn(v.rows(), n - start, |r, c| v[(r, start + c)])
    }

    /// The eigenvectors for the `k` largest eigenvalues, as columns.
    pub fn leading_vectors(&self, k: usize) -> ComplexMatrix {
        let v = &self.eigenvectors;
        ComplexMatrix::from_fn(v.rows(), k.min(v.cols()), |r, c| v[(r, c)])
    }
}

/// Eigendecomposition of a Hermitian matrix by cyclic Jacobi sweeps.
pub fn hermitian_eig(a: &ComplexMatrix) -> Result<HermitianEig> {
    let mut a = a.symmetrized()?;
    let n = a.rows();
    let mut v = ComplexMatrix::identity(n);
    let thresh = OFFDIAG_TOL * a.frobenius_norm();

    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        if max_offdiag(&a) <= thresh {
            converged = true;
            break;
        }
        for p in 0..n.saturating_sub(1) {
            for q in (p + 1)..n {
                rotate(&mut a, &mut v, p, q, 0.01 * thresh);
            }
        }
    }
    if !converged && max_offdiag(&a) > thresh {
        return Err(Error::NoConvergence(MAX_SWEEPS));
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag = a.diag_real();
    order.sort_by(|&i, &j| diag[j].partial_cmp(&diag[i]).unwrap_or(std::cmp::Ordering::Equal));

    let eigenvalues = order.iter().map(|&i| diag[i]).collect();
    let mut eigenvectors = ComplexMatrix::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        let mut col = v.column(i);
        canonicalize_phase(&mut col);
        eigenvectors.set_column(k, &col);
    }
    Ok(HermitianEig { eigenvalues, eigenvectors })
}

fn max_offdiag(a: &ComplexMatrix) -> f64 {
    let n = a.rows();
    let mut m = 0.0f64;
    for r in 0..n {
        for c in (r + 1)..n {
            m = m.max(a[(r, c)].norm());
        }
    }
    m
}

fn rotate(a: &mut ComplexMatrix, v: &mut ComplexMatrix, p: usize, q: usize, skip_below: f64) {
    let apq = a[(p, q)];
    let g = apq.norm();
    if g == 0.0 || g <= skip_below {
        return;
    }
    let n = a.rows();
    let app = a[(p, p)].re;
    let aqq = a[(q, q)].re;
    let phase = apq / g;
    let tau = (aqq - app) / (2.0 * g);
    let t = if tau >= 0.0 {
        1.0 / (tau + (1.0 + tau * tau).sqrt())
    } else {
        -1.0 / (-tau + (1.0 + tau * tau).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;

    // R = [[c, s], [-s e^{-iφ}, c e^{-iφ}]] acting on coordinates (p, q).
    let r_qp = -phase.conj() * s;
    let r_qq = phase.conj() * c;

    for k in 0..n {
        let x = a[(k, p)];
        let y = a[(k, q)];
        a[(k, p)] = x * c + y * r_qp;
        a[(k, q)] = x * s + y * r_qq;
    }
    for k in 0..n {
        let x = a[(p, k)];
        let y = a[(q, k)];
        a[(p, k)] = x * c + y * r_qp.conj();
        a[(q, k)] = x * s + y * r_qq.conj();
    }
    a[(p, q)] = C64::new(0.0, 0.0);
    a[(q, p)] = C64::new(0.0, 0.0);
    a[(p, p)] = C64::new(app - t * g, 0.0);
    a[(q, q)] = C64::new(aqq + t * g, 0.0);

    for k in 0..n {
        let x = v[(k, p)];
        let y = v[(k, q)];
        v[(k, p)] = x * c + y * r_qp;
        v[(k, q)] = x * s + y * r_qq;
    }
}

fn canonicalize_phase(col: &mut [C64]) {
    if let Some(first) = col.iter().copied().find(|z| z.norm() > 1e-10) {
        let rot = first.conj() / first.norm();
        for z in col.iter_mut() {
            *z *= rot;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::array_response;

    fn random_hermitian(n: usize, seed: u64) -> ComplexMatrix {
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        let x = ComplexMatrix::from_fn(n, n, |_, _| C64::new(next(), next()));
        x.add(&x.adjoint()).unwrap()
    }

    #[test]
    fn identity_spectrum() {
        let e = hermitian_eig(&ComplexMatrix::identity(3)).unwrap();
        assert_eq!(e.eigenvalues, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn diagonal_sorted_descending() {
        let e = hermitian_eig(&ComplexMatrix::from_real_diag(&[3.0, 1.0, 2.0])).unwrap();
        assert_eq!(e.eigenvalues, vec![3.0, 2.0, 1.0]);
    }

    #[test]
    fn rank_one_steering_outer_product() {
        let a = array_response(8, 0.4, 1.0);
        let e = hermitian_eig(&ComplexMatrix::outer(&a)).unwrap();
        assert!((e.eigenvalues[0] - 8.0).abs() < 1e-10);
        for &l in &e.eigenvalues[1..] {
            assert!(l.abs() < 1e-10);
        }
    }

    #[test]
    fn residual_unitarity_and_invariants() {
        for seed in 0..5 {
            let a = random_hermitian(12, seed);
            let e = hermitian_eig(&a).unwrap();
            let norm = a.frobenius_norm();
            let v = &e.eigenvectors;
            for k in 0..12 {
                let vk = v.column(k);
                let av = a.mul_vec(&vk);
                let res: f64 = av
                    .iter()
                    .zip(&vk)
                    .map(|(x, y)| (x - y * e.eigenvalues[k]).norm_sqr())
                    .sum::<f64>()
                    .sqrt();
                assert!(res <= 1e-8 * norm, "residual {res}");
            }
            let vhv = v.adjoint().matmul(v).unwrap();
            assert!(vhv.max_abs_diff(&ComplexMatrix::identity(12)) < 1e-10);
            let tr = a.trace().re;
            let sum: f64 = e.eigenvalues.iter().sum();
            assert!((tr - sum).abs() <= 1e-9 * tr.abs().max(norm));
            let fro2: f64 = e.eigenvalues.iter().map(|l| l * l).sum();
            assert!((fro2 - norm * norm).abs() <= 1e-9 * norm * norm);
            assert!(e.reconstruct().max_abs_diff(&a) <= 1e-8 * norm);
        }
    }

    #[test]
    fn rejects_non_square() {
        let a = ComplexMatrix::zeros(2, 3);
        assert!(matches!(hermitian_eig(&a), Err(Error::NotSquare { .. })));
    }

    #[test]
    fn rejects_non_finite() {
        let mut a = ComplexMatrix::identity(2);
        a[(0, 0)] = C64::new(f64::INFINITY, 0.0);
        assert!(hermitian_eig(&a).is_err());
    }
}
