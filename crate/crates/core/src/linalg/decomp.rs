//! Dense LU with partial pivoting and Cholesky factorization.

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::scalar::Scalar;

/// Relative pivot threshold: a pivot below this times the largest initial
/// column norm is treated as zero.
pub const PIVOT_TOL: f64 = 1e-14;

/// Relative asymmetry accepted by the symmetric factorizations.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Packed `P·A = L·U` factors.
#[derive(Debug, Clone)]
pub struct LuFactor<T> {
    lu: DenseMatrix<T>,
    perm: Vec<usize>,
}

impl<T: Scalar> LuFactor<T> {
    pub fn new(mut a: DenseMatrix<T>) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "LU of a {}x{} matrix",
                a.rows(),
                a.cols()
            )));
        }
        if !a.is_finite() {
            return Err(Error::NonFinite);
        }
        let n = a.rows();
        let scale = a.max_column_norm();
        let tol = T::rel_tol(PIVOT_TOL) * scale;
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, pmax) = (k..n)
                .map(|i| (i, a[(i, k)].abs()))
                .fold((k, T::zero()), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pmax <= tol || scale == T::zero() {
                return Err(Error::SingularMatrix {
                    step: k,
                    pivot: pmax.to_f64_lossy(),
                });
            }
            a.swap_rows(k, p);
            perm.swap(k, p);
            let pivot = a[(k, k)];
            let (head, lower) = a.as_mut_slice().split_at_mut((k + 1) * n);
            let upper = &head[k * n..];
            for row in lower.chunks_exact_mut(n) {
                let l = row[k] / pivot;
                row[k] = l;
                if l != T::zero() {
                    for (r, &u) in row[k + 1..].iter_mut().zip(&upper[k + 1..]) {
                        *r -= l * u;
                    }
                }
            }
        }
        Ok(Self { lu: a, perm })
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.dim();
        assert_eq!(b.len(), n, "rhs length");
        let mut x: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let row = self.lu.row(i);
            let s: T = row[..i].iter().zip(&x[..i]).map(|(&l, &y)| l * y).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let row = self.lu.row(i);
            let s: T = row[i + 1..].iter().zip(&x[i + 1..]).map(|(&u, &y)| u * y).sum();
            x[i] = (x[i] - s) / row[i];
        }
        x
    }
}

/// Solves `a·x = b` by LU with partial pivoting.
pub fn lu_solve<T: Scalar>(a: &DenseMatrix<T>, b: &[T]) -> Result<Vec<T>> {
    if b.len() != a.rows() {
        return Err(Error::DimensionMismatch(format!(
            "rhs of length {} for {} rows",
            b.len(),
            a.rows()
        )));
    }
    Ok(LuFactor::new(a.clone())?.solve(b))
}

/// Lower-triangular `L` with `L·Lᵀ = a`.
pub fn cholesky<T: Scalar>(a: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
    a.check_symmetric(T::rel_tol(SYMMETRY_TOL))?;
    let n = a.rows();
    let mut l = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let lj = l.row(j)[..j].to_vec();
        let d = a[(j, j)] - lj.iter().map(|&x| x * x).sum::<T>();
        if d <= T::zero() || !d.is_finite() {
            return Err(Error::NotPositiveDefinite {
                step: j,
                pivot: d.to_f64_lossy(),
            });
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in (j + 1)..n {
            let s: T = l.row(i)[..j].iter().zip(&lj).map(|(&x, &y)| x * y).sum();
            l[(i, j)] = (a[(i, j)] - s) / djj;
        }
    }
    Ok(l)
}

/// Solves `L·x = b` for lower-triangular `L`.
pub fn forward_substitution<T: Scalar>(l: &DenseMatrix<T>, b: &[T]) -> Vec<T> {
    let n = l.rows();
    let mut x = b.to_vec();
    for i in 0..n {
        let row = l.row(i);
        let s: T = row[..i].iter().zip(&x[..i]).map(|(&a, &y)| a * y).sum();
        x[i] = (x[i] - s) / row[i];
    }
    x
}

/// Solves `Lᵀ·x = b` for lower-triangular `L`.
pub fn backward_substitution_transposed<T: Scalar>(l: &DenseMatrix<T>, b: &[T]) -> Vec<T> {
    let n = l.rows();
    let mut x = b.to_vec();
    for i in (0..n).rev() {
        x[i] /= l[(i, i)];
        let xi = x[i];
        for (k, xk) in x[..i].iter_mut().enumerate() {
            *xk -= l[(i, k)] * xi;
        }
    }
    x
}

/// Solves `X·Lᵀ = B` for `X` (row-wise forward substitution).
pub fn right_solve_lower_transposed<T: Scalar>(
    b: &DenseMatrix<T>,
    l: &DenseMatrix<T>,
) -> DenseMatrix<T> {
    assert_eq!(b.cols(), l.rows());
    let mut x = b.clone();
    for r in 0..b.rows() {
        let sol = forward_substitution(l, b.row(r));
        x.row_mut(r).copy_from_slice(&sol);
    }
    x
}

/// Solves `L·X = B` for `X` (column-wise forward substitution).
pub fn left_solve_lower<T: Scalar>(l: &DenseMatrix<T>, b: &DenseMatrix<T>) -> DenseMatrix<T> {
    assert_eq!(l.rows(), b.rows());
    let n = l.rows();
    let mut x = b.clone();
    for i in 0..n {
        for k in 0..i {
            let lik = l[(i, k)];
            if lik == T::zero() {
                continue;
            }
            let (head, tail) = split_rows(&mut x, k, i);
            for (t, &h) in tail.iter_mut().zip(head) {
                *t -= lik * h;
            }
        }
        let d = l[(i, i)];
        x.row_mut(i).iter_mut().for_each(|v| *v /= d);
    }
    x
}

// Immutable row k and mutable row i (k < i).
fn split_rows<T: Scalar>(x: &mut DenseMatrix<T>, k: usize, i: usize) -> (&[T], &mut [T]) {
    debug_assert!(k < i);
    let cols = x.cols();
    let (a, b) = x.as_mut_slice().split_at_mut(i * cols);
    (&a[k * cols..(k + 1) * cols], &mut b[..cols])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_solve() {
        let x = lu_solve(&DenseMatrix::identity(3), &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(x, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn diagonal_solve() {
        let a = DenseMatrix::from_rows(&[[2.0, 0.0], [0.0, 4.0]]).unwrap();
        assert_eq!(lu_solve(&a, &[2.0, 8.0]).unwrap(), vec![1.0, 2.0]);
    }

    #[test]
    fn random_well_conditioned_system() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 50;
        let a = DenseMatrix::from_fn(n, n, |i, j| {
            let r: f64 = rng.gen_range(-1.0..1.0);
            if i == j {
                r + 10.0
            } else {
                r
            }
        });
        let xs: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b = a.matvec(&xs);
        let x = lu_solve(&a, &b).unwrap();
        let err: f64 = x.iter().zip(&xs).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let nrm: f64 = xs.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(err / nrm <= 1e-8);
        let r = a.matvec(&x);
        let res: f64 = r.iter().zip(&b).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let bn: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(res <= 1e-10 * (a.frobenius_norm() * x.iter().map(|v| v * v).sum::<f64>().sqrt() + bn));
    }

    #[test]
    fn pivoting_handles_zero_leading_entry() {
        let a = DenseMatrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]).unwrap();
        assert_eq!(lu_solve(&a, &[3.0, 4.0]).unwrap(), vec![4.0, 3.0]);
    }

    #[test]
    fn singular_detected() {
        let a = DenseMatrix::from_rows(&[[1.0, 2.0], [2.0, 4.0]]).unwrap();
        assert!(matches!(lu_solve(&a, &[1.0, 1.0]), Err(Error::SingularMatrix { .. })));
    }

    #[test]
    fn single_precision_solve() {
        let a = DenseMatrix::from_rows(&[[4.0f32, 1.0], [1.0, 3.0]]).unwrap();
        let x = lu_solve(&a, &[1.0, 2.0]).unwrap();
        assert!((x[0] - 1.0 / 11.0).abs() < 1e-6 && (x[1] - 7.0 / 11.0).abs() < 1e-6);
    }

    #[test]
    fn cholesky_examples() {
        let l = cholesky(&DenseMatrix::from_rows(&[[4.0]]).unwrap()).unwrap();
        assert_eq!(l[(0, 0)], 2.0);
        let a = DenseMatrix::from_rows(&[[4.0, 2.0], [2.0, 5.0]]).unwrap();
        let l = cholesky(&a).unwrap();
        assert_eq!(l, DenseMatrix::from_rows(&[[2.0, 0.0], [1.0, 2.0]]).unwrap());
        let indefinite = DenseMatrix::from_rows(&[[1.0, 2.0], [2.0, 1.0]]).unwrap();
        assert!(matches!(cholesky(&indefinite), Err(Error::NotPositiveDefinite { .. })));
    }

    #[test]
    fn cholesky_rejects_asymmetric_input() {
        let a = DenseMatrix::from_rows(&[[4.0, 2.0], [1.0, 5.0]]).unwrap();
        assert!(matches!(cholesky(&a), Err(Error::NotSymmetric { .. })));
    }

    #[test]
    fn triangular_solves_agree() {
        let a = DenseMatrix::from_rows(&[[4.0f64, 2.0, 1.0], [2.0, 5.0, 0.5], [1.0, 0.5, 3.0]]).unwrap();
        let l = cholesky(&a).unwrap();
        let rec = l.matmul(&l.transpose());
        assert!(rec.sub(&a).frobenius_norm() <= 1e-12 * a.frobenius_norm());
        let b = [1.0, -2.0, 0.5];
        let y = forward_substitution(&l, &b);
        let x = backward_substitution_transposed(&l, &y);
        let r = a.matvec(&x);
        for (ri, bi) in r.iter().zip(&b) {
            assert!((ri - bi).abs() < 1e-13);
        }
        let bm = DenseMatrix::from_rows(&[[1.0, 2.0, 3.0], [0.0, 1.0, -1.0]]).unwrap();
        let xr = right_solve_lower_transposed(&bm, &l);
        assert!(xr.matmul(&l.transpose()).sub(&bm).max_abs() < 1e-13);
        let xl = left_solve_lower(&l, &bm.transpose());
        assert!(l.matmul(&xl).sub(&bm.transpose()).max_abs() < 1e-13);
    }
}
