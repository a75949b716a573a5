//! Cyclic Jacobi eigensolver for symmetric matrices.

use crate::error::Result;
use crate::linalg::decomp::SYMMETRY_TOL;
use crate::linalg::DenseMatrix;
use crate::scalar::Scalar;

const MAX_SWEEPS: usize = 100;

/// Eigenvalues in decreasing order and the matching orthonormal
/// eigenvectors as columns of `vectors`.
#[derive(Debug, Clone)]
pub struct SymEigen<T> {
    pub values: Vec<T>,
    pub vectors: DenseMatrix<T>,
}

pub fn sym_eig<T: Scalar>(a: &DenseMatrix<T>) -> Result<SymEigen<T>> {
    a.check_symmetric(T::rel_tol(SYMMETRY_TOL))?;
    let n = a.rows();
    // symmetrize exactly so that rounding-level asymmetry does not leak in
    let mut m = DenseMatrix::from_fn(n, n, |i, j| (a[(i, j)] + a[(j, i)]) / T::lit(2.0));
    let mut q = DenseMatrix::identity(n);
    let scale = m.frobenius_norm();
    let threshold = T::epsilon() * scale;

    for _ in 0..MAX_SWEEPS {
        let mut off = T::zero();
        for i in 0..n {
            for j in (i + 1)..n {
                off += m[(i, j)] * m[(i, j)];
            }
        }
        if off.sqrt() <= threshold {
            break;
        }
        for p in 0..n {
            for r in (p + 1)..n {
                let apr = m[(p, r)];
                if apr.abs() <= T::min_positive_value() {
                    continue;
                }
                let theta = (m[(r, r)] - m[(p, p)]) / (T::lit(2.0) * apr);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                // columns p, r
                for k in 0..n {
                    let (mkp, mkr) = (m[(k, p)], m[(k, r)]);
                    m[(k, p)] = c * mkp - s * mkr;
                    m[(k, r)] = s * mkp + c * mkr;
                }
                // rows p, r
                for k in 0..n {
                    let (mpk, mrk) = (m[(p, k)], m[(r, k)]);
                    m[(p, k)] = c * mpk - s * mrk;
                    m[(r, k)] = s * mpk + c * mrk;
                }
                m[(p, r)] = T::zero();
                m[(r, p)] = T::zero();
                for k in 0..n {
                    let (qkp, qkr) = (q[(k, p)], q[(k, r)]);
                    q[(k, p)] = c * qkp - s * qkr;
                    q[(k, r)] = s * qkp + c * qkr;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| {
        m[(y, y)]
            .partial_cmp(&m[(x, x)])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let values = order.iter().map(|&k| m[(k, k)]).collect();
    let vectors = DenseMatrix::from_fn(n, n, |i, j| q[(i, order[j])]);
    Ok(SymEigen { values, vectors })
}

/// Largest eigenvalue of the symmetric pencil `(a, b)` with `b` positive
/// definite, through the Cholesky reduction `L⁻¹·a·L⁻ᵀ`.
pub fn generalized_max_eigenvalue<T: Scalar>(
    a: &DenseMatrix<T>,
    b: &DenseMatrix<T>,
) -> Result<T> {
    use crate::linalg::decomp::{cholesky, left_solve_lower, right_solve_lower_transposed};
    let l = cholesky(b)?;
    let x = left_solve_lower(&l, a);
    let c = right_solve_lower_transposed(&x, &l);
    let c = DenseMatrix::from_fn(c.rows(), c.cols(), |i, j| (c[(i, j)] + c[(j, i)]) / T::lit(2.0));
    let eig = sym_eig(&c)?;
    Ok(eig.values.first().copied().unwrap_or(T::zero()))
}
