//! Dense complex linear algebra: Hermitian eigendecomposition, structured
//! projections, matrix square roots and the CMX1 text format.

mod chol;
pub mod cmx;
mod eig;
mod matrix;
mod project;

pub use chol::HpdFactor;
pub use eig::{hermitian_eig, HermitianEig};
pub use matrix::{ComplexMatrix, C64, HERMITIAN_TOL};
pub use project::{psd_project, psd_sqrt, toeplitz_project};

pub(crate) use matrix::{from_nalgebra, to_nalgebra};
