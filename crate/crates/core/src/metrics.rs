//! Estimation-quality metrics against a known covariance.

use crate::error::{invalid, Error, Result};
use crate::linalg::{from_nalgebra, hermitian_eig, to_nalgebra, ComplexMatrix};

fn same_shape(truth: &ComplexMatrix, est: &ComplexMatrix) -> Result<usize> {
    let m = truth.ensure_square()?;
    if est.rows() != m || est.cols() != m {
        return Err(Error::DimensionMismatch(format!(
            "truth is {m}x{m}, estimate is {}x{}",
            est.rows(),
            est.cols()
        )));
    }
    Ok(m)
}

/// `‖Σ − Σ̂‖_F / ‖Σ‖_F`.
pub fn err_frobenius(truth: &ComplexMatrix, est: &ComplexMatrix) -> Result<f64> {
    same_shape(truth, est)?;
    let norm = truth.frobenius_norm();
    if norm == 0.0 {
        return Err(invalid("zero ground-truth covariance"));
    }
    Ok(truth.sub(est)?.frobenius_norm() / norm)
}

/// Reciprocal condition number below which the MMSE filter is rejected.
pub const FILTER_RCOND: f64 = 1e-12;

/// Normalized MSE of the linear filter `Σ̂(N0 I + Σ̂)⁻¹` applied to
/// `y = h + z`, in closed form over `h ~ CN(0, Σ)` and `z ~ CN(0, N0 I)`.
///
/// Fails with [`Error::Singular`] when `N0 I + Σ̂` is numerically singular,
/// as for the sample covariance with fewer snapshots than antennas.
pub fn err_nmse(truth: &ComplexMatrix, est: &ComplexMatrix, n0: f64) -> Result<f64> {
    let m = same_shape(truth, est)?;
    if !(n0 >= 0.0) || !n0.is_finite() {
        return Err(invalid(format!("noise power must be nonnegative, got {n0}")));
    }
    let power = truth.trace().re;
    if !(power > 0.0) {
        return Err(invalid("ground-truth covariance has no power"));
    }
    let mut filt = est.symmetrized()?;
    filt.add_diag(n0);
    let spectrum = hermitian_eig(&filt)?.eigenvalues;
    let (lo, hi) = spectrum.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &l| (lo.min(l.abs()), hi.max(l.abs())));
    if !(lo > FILTER_RCOND * hi) {
        return Err(Error::Singular(format!("N0 I + Σ̂ in the MMSE filter (eigenvalue ratio {:e})", lo / hi)));
    }
    let inv = to_nalgebra(&filt)
        .try_inverse()
        .ok_or_else(|| Error::Singular("N0 I + Σ̂ in the MMSE filter".into()))?;
    let w = est.matmul(&from_nalgebra(&inv))?;
    let resid = ComplexMatrix::identity(m).sub(&w)?;
    let leak = resid.matmul(truth)?.matmul(&resid.adjoint())?.trace().re;
    let noise = n0 * w.frobenius_norm().powi(2);
    Ok((leak + noise) / power)
}

/// `1 − tr(Û_pᴴ Σ Û_p) / tr(U_pᴴ Σ U_p)` with `U_p`, `Û_p` the `p` dominant
/// eigenvectors of `Σ` and `Σ̂`.
pub fn power_efficiency(truth: &ComplexMatrix, est: &ComplexMatrix, p: usize) -> Result<f64> {
    let m = same_shape(truth, est)?;
    if p == 0 || p > m {
        return Err(invalid(format!("subspace dimension p = {p} outside 1..={m}")));
    }
    let captured = |u: &ComplexMatrix| -> Result<f64> { Ok(u.adjoint().matmul(truth)?.matmul(u)?.trace().re) };
    let best = captured(&hermitian_eig(truth)?.leading_vectors(p))?;
    if !(best > 0.0) {
        return Err(invalid("ground-truth covariance has no dominant power"));
    }
    let got = captured(&hermitian_eig(&est.symmetrized()?)?.leading_vectors(p))?;
    Ok(1.0 - got / best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frobenius_trivial_cases() {
        let s = ComplexMatrix::from_real_diag(&[2.0, 1.0, 0.5]);
        assert_eq!(err_frobenius(&s, &s).unwrap(), 0.0);
        assert!((err_frobenius(&s, &ComplexMatrix::zeros(3, 3)).unwrap() - 1.0).abs() < 1e-15);
        assert!((err_frobenius(&s, &s.scale(2.0)).unwrap() - 1.0).abs() < 1e-15);
        assert!(err_frobenius(&ComplexMatrix::zeros(3, 3), &s).is_err());
    }

    #[test]
    fn nmse_zero_estimate_is_one() {
        let s = ComplexMatrix::from_real_diag(&[2.0, 1.0]);
        assert!((err_nmse(&s, &ComplexMatrix::zeros(2, 2), 0.3).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn nmse_rejects_singular_filter() {
        let s = ComplexMatrix::from_real_diag(&[2.0, 1.0]);
        let est = ComplexMatrix::from_real_diag(&[1.0, -0.3]);
        assert!(matches!(err_nmse(&s, &est, 0.3), Err(Error::Singular(_))));
    }

    #[test]
    fn power_efficiency_swap() {
        let t = ComplexMatrix::from_real_diag(&[3.0, 1.0]);
        let e = ComplexMatrix::from_real_diag(&[1.0, 3.0]);
        assert!((power_efficiency(&t, &e, 1).unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert!(power_efficiency(&t, &e, 2).unwrap().abs() < 1e-12);
        assert!(power_efficiency(&t, &e, 3).is_err());
    }
}
