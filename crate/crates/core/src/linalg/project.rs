use crate::error::{Error, Result};
use crate::linalg::eig::hermitian_eig;
use crate::linalg::matrix::{ComplexMatrix, C64};

/// Orthogonal projection onto Hermitian Toeplitz matrices by diagonal averaging.
///
/// Returns the projected matrix together with its first column. Lag `k` of the
/// first column is the mean of the `M − k` entries `A[r + k, r]`.
pub fn toeplitz_project(a: &ComplexMatrix) -> Result<(ComplexMatrix, Vec<C64>)> {
    let a = a.symmetrized()?;
    let col = toeplitz_first_column(&a);
    Ok((ComplexMatrix::hermitian_toeplitz(&col), col))
}

/// Diagonal averages of an (already Hermitian) square matrix.
pub(crate) fn toeplitz_first_column(a: &ComplexMatrix) -> Vec<C64> {
    let n = a.rows();
    (0..n)
        .map(|k| {
            let sum: C64 = (0..n - k).map(|r| a[(r + k, r)]).sum();
            let mut v = sum / (n - k) as f64;
            if k == 0 {
                v.im = 0.0;
            }
            v
        })
        .collect()
}

/// Projection onto the PSD cone: negative eigenvalues are clamped to zero.
pub fn psd_project(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    let eig = hermitian_eig(a)?;
    Ok(eig.reconstruct_with(|l| l.max(0.0)))
}

/// Hermitian square root `V diag(√λ) V^H` of a PSD matrix.
///
/// Eigenvalues down to `−1e-10 · ‖A‖_F` are treated as zero; anything more
/// negative is rejected. Eigenvalues within `1e-12 · ‖A‖_F` of zero are
/// roundoff and are dropped before the root is taken.
pub fn psd_sqrt(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    let eig = hermitian_eig(a)?;
    let allowed = -1e-10 * a.frobenius_norm();
    let min_eig = eig.eigenvalues.last().copied().unwrap_or(0.0);
    if min_eig < allowed {
        return Err(Error::Indefinite { min_eig, allowed });
    }
    let floor = 1e-12 * a.frobenius_norm();
    Ok(eig.reconstruct_with(|l| if l <= floor { 0.0 } else { l.sqrt() }))
}
