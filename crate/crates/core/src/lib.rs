//! A mixed finite-element laboratory for the discrete inf-sup condition.
//!
//! The crate assembles Stokes-type saddle-point problems on structured
//! triangulations of the unit square with stable (Taylor–Hood, mini, P2/P0)
//! and unstable (P1/P1, P1/P0) element pairs, applies pressure
//! stabilizations, reproduces and corrects locking of a penalized problem,
//! enforces Dirichlet data weakly, and measures discrete inf-sup constants
//! through a singular value decomposition of the coupling block.
//!
//! The low-level kernels (`linalg`, `mesh`, `fespace`, `assembly`,
//! `infsup`) are generic over [`Scalar`]; the experiment drivers run in
//! double precision. Concrete aliases for both precisions live here.

pub mod assembly;
pub mod criteria;
pub mod error;
pub mod fespace;
pub mod infsup;
pub mod io;
pub mod linalg;
pub mod locking;
pub mod mesh;
pub mod scalar;
pub mod stokes;
pub mod verify;
pub mod weakbc;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type DenseMatrixF64 = linalg::DenseMatrix<f64>;
pub type DenseMatrixF32 = linalg::DenseMatrix<f32>;
pub type CsrMatrixF64 = linalg::CsrMatrix<f64>;
pub type CsrMatrixF32 = linalg::CsrMatrix<f32>;
pub type SvdResultF64 = linalg::SvdResult<f64>;
pub type MeshF64 = mesh::Mesh<f64>;
pub type MeshF32 = mesh::Mesh<f32>;
pub type FeSpaceF64<'m> = fespace::FeSpace<'m, f64>;
pub type SaddleSystemF64 = assembly::SaddleSystem<f64>;
pub type InfSupReportF64 = infsup::InfSupReport<f64>;
