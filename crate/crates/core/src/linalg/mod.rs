//! Dense and sparse linear algebra used by the assembly and analysis code.

mod banded;
mod csr;
pub mod decomp;
mod dense;
mod eig;
pub mod svd;

pub use banded::{reverse_cuthill_mckee, BandedLu};
pub use csr::{block_matrix, CsrMatrix, Triplets};
pub use decomp::{cholesky, lu_solve, LuFactor};
pub use dense::{dot, norm2, DenseMatrix};
pub use eig::{generalized_max_eigenvalue, sym_eig, SymEigen};
pub use svd::{singular_values, svd, svd_thin, SvdResult};
