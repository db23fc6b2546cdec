use nalgebra::{Cholesky, DMatrix, Dyn};

use crate::error::{Error, Result};
use crate::linalg::matrix::{from_nalgebra, to_nalgebra, ComplexMatrix, C64};

/// Cholesky factor of a Hermitian positive-definite matrix.
pub struct HpdFactor {
    chol: Cholesky<C64, Dyn>,
}

impl HpdFactor {
    pub fn new(a: &ComplexMatrix) -> Result<Self> {
        a.ensure_square()?;
        Cholesky::new(to_nalgebra(a))
            .map(|chol| Self { chol })
            .ok_or_else(|| Error::Singular("matrix is not positive definite".into()))
    }

    pub fn log_det(&self) -> f64 {
        let l = self.chol.l_dirty();
        2.0 * (0..l.nrows()).map(|i| l[(i, i)].re.ln()).sum::<f64>()
    }

    /// `A^{-1} B`.
    pub fn solve(&self, b: &ComplexMatrix) -> ComplexMatrix {
        from_nalgebra(&self.chol.solve(&to_nalgebra(b)))
    }

    pub(crate) fn solve_na(&self, b: &DMatrix<C64>) -> DMatrix<C64> {
        self.chol.solve(b)
    }

    pub fn inverse(&self) -> ComplexMatrix {
        from_nalgebra(&self.chol.inverse())
    }
}
