//! Singular value decomposition by one-sided (Hestenes) Jacobi rotations.
//!
//! Column pairs of a working copy are rotated until they are mutually
//! orthogonal; the column norms are then the singular values and the
//! accumulated rotations form `V`. Wide matrices are handled through their
//! transpose so that the rotated side is always the shorter dimension.

use crate::error::{Error, Result};
use crate::linalg::dense::dot;
use crate::linalg::DenseMatrix;
use crate::scalar::Scalar;

/// Relative orthogonality threshold for a column pair to be left alone.
pub const JACOBI_TOL: f64 = 1e-14;

/// Default numerical rank tolerance factor, multiplied by `max(m, n)`.
/// Floored at a few machine epsilons in single precision.
pub const DEFAULT_RANK_FACTOR: f64 = 1e-10;

const MAX_SWEEPS: usize = 80;

/// `a = U · Σᵀ · Vᵀ` with `sigma` sorted in decreasing order.
///
/// For a full decomposition `u` is `m×m` and `v` is `n×n`; for a thin one
/// both carry `min(m, n)` columns.
#[derive(Debug, Clone)]
pub struct SvdResult<T> {
    pub u: DenseMatrix<T>,
    pub sigma: Vec<T>,
    pub v: DenseMatrix<T>,
    /// Relative tolerance: `sigma[i]` counts toward the rank when it exceeds
    /// `rank_tol * sigma[0]`.
    pub rank_tol: T,
    pub numerical_rank: usize,
}

impl<T: Scalar> SvdResult<T> {
    /// Smallest singular value counted in the numerical rank.
    pub fn smallest_positive(&self) -> Option<T> {
        self.numerical_rank.checked_sub(1).map(|r| self.sigma[r])
    }

    /// Rebuilds `U · Σᵀ · Vᵀ`.
    pub fn reconstruct(&self) -> DenseMatrix<T> {
        let m = self.u.rows();
        let n = self.v.rows();
        let mut out = DenseMatrix::zeros(m, n);
        for (k, &s) in self.sigma.iter().enumerate() {
            if s == T::zero() {
                continue;
            }
            for i in 0..m {
                let us = self.u[(i, k)] * s;
                if us == T::zero() {
                    continue;
                }
                for j in 0..n {
                    out[(i, j)] += us * self.v[(j, k)];
                }
            }
        }
        out
    }

    /// Re-evaluates the numerical rank with a different relative tolerance.
    pub fn with_rank_tol(mut self, rank_tol: T) -> Self {
        self.rank_tol = rank_tol;
        self.numerical_rank = count_rank(&self.sigma, rank_tol);
        self
    }
}

fn count_rank<T: Scalar>(sigma: &[T], rank_tol: T) -> usize {
    let Some(&s0) = sigma.first() else { return 0 };
    if s0 == T::zero() {
        return 0;
    }
    sigma.iter().filter(|&&s| s > rank_tol * s0).count()
}

pub fn default_rank_tol<T: Scalar>(m: usize, n: usize) -> T {
    T::rel_tol(DEFAULT_RANK_FACTOR) * T::from_count(m.max(n).max(1))
}

/// Full SVD with `U` (`m×m`) and `V` (`n×n`) orthogonal.
pub fn svd<T: Scalar>(a: &DenseMatrix<T>) -> Result<SvdResult<T>> {
    let thin = svd_thin(a)?;
    let (m, n) = (a.rows(), a.cols());
    let u = complete_basis(&thin.u, m);
    let v = complete_basis(&thin.v, n);
    let mut sigma = thin.sigma;
    sigma.resize(m.min(n), T::zero());
    Ok(SvdResult {
        u,
        sigma,
        v,
        rank_tol: thin.rank_tol,
        numerical_rank: thin.numerical_rank,
    })
}

/// Thin SVD: `u` is `m×p`, `v` is `n×p` with `p = min(m, n)`.
///
/// Singular vectors on the rotated side (`V` when `m ≥ n`, `U` otherwise)
/// are orthonormal to working precision even for zero singular values;
/// on the other side, columns for negligible singular values are zero.
pub fn svd_thin<T: Scalar>(a: &DenseMatrix<T>) -> Result<SvdResult<T>> {
    if !a.is_finite() {
        return Err(Error::NonFinite);
    }
    let (m, n) = (a.rows(), a.cols());
    let rank_tol = default_rank_tol(m, n);
    if m >= n {
        let (u, sigma, v) = one_sided_jacobi(a);
        let numerical_rank = count_rank(&sigma, rank_tol);
        Ok(SvdResult {
            u,
            sigma,
            v,
            rank_tol,
            numerical_rank,
        })
    } else {
        let (v, sigma, u) = one_sided_jacobi(&a.transpose());
        let numerical_rank = count_rank(&sigma, rank_tol);
        Ok(SvdResult {
            u,
            sigma,
            v,
            rank_tol,
            numerical_rank,
        })
    }
}

/// Singular values only, in decreasing order.
pub fn singular_values<T: Scalar>(a: &DenseMatrix<T>) -> Result<Vec<T>> {
    Ok(svd_thin(a)?.sigma)
}

// Requires m >= n. Returns (U thin m×n, sigma, V n×n).
fn one_sided_jacobi<T: Scalar>(a: &DenseMatrix<T>) -> (DenseMatrix<T>, Vec<T>, DenseMatrix<T>) {
    let (m, n) = (a.rows(), a.cols());
    debug_assert!(m >= n);
    // column-major working copies
    let mut cols: Vec<Vec<T>> = (0..n).map(|j| a.column(j)).collect();
    let mut vcols: Vec<Vec<T>> = (0..n)
        .map(|j| {
            let mut e = vec![T::zero(); n];
            e[j] = T::one();
            e
        })
        .collect();
    let tol = T::rel_tol(JACOBI_TOL).max(T::epsilon() * T::from_count(m).sqrt());
    let mut norms: Vec<T> = cols.iter().map(|c| dot(c, c)).collect();

    for _sweep in 0..MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..n {
            for j in (i + 1)..n {
                let alpha = norms[i];
                let beta = norms[j];
                if alpha == T::zero() || beta == T::zero() {
                    continue;
                }
                let gamma = dot(&cols[i], &cols[j]);
                if gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (T::lit(2.0) * gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                let (ci, cj) = pair_mut(&mut cols, i, j);
                rotate(ci, cj, c, s);
                let (vi, vj) = pair_mut(&mut vcols, i, j);
                rotate(vi, vj, c, s);
                norms[i] = dot(&cols[i], &cols[i]);
                norms[j] = dot(&cols[j], &cols[j]);
            }
        }
        if !rotated {
            break;
        }
    }

    let sigma: Vec<T> = cols.iter().map(|c| dot(c, c).sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| sigma[y].partial_cmp(&sigma[x]).unwrap_or(std::cmp::Ordering::Equal));
    let smax = order.first().map_or(T::zero(), |&k| sigma[k]);
    // columns whose norm is at rounding level carry no direction information
    let negligible = smax * T::epsilon() * T::from_count(m.max(1));

    let mut u = DenseMatrix::zeros(m, n);
    let mut v = DenseMatrix::zeros(n, n);
    let mut sorted = Vec::with_capacity(n);
    for (k, &src) in order.iter().enumerate() {
        let s = sigma[src];
        sorted.push(s);
        if s > negligible && s > T::zero() {
            let col: Vec<T> = cols[src].iter().map(|&x| x / s).collect();
            u.set_column(k, &col);
        }
        v.set_column(k, &vcols[src]);
    }
    (u, sorted, v)
}

#[inline]
fn rotate<T: Scalar>(x: &mut [T], y: &mut [T], c: T, s: T) {
    for (a, b) in x.iter_mut().zip(y.iter_mut()) {
        let (xa, yb) = (*a, *b);
        *a = c * xa - s * yb;
        *b = s * xa + c * yb;
    }
}

fn pair_mut<T>(v: &mut [Vec<T>], i: usize, j: usize) -> (&mut Vec<T>, &mut Vec<T>) {
    debug_assert!(i < j);
    let (lo, hi) = v.split_at_mut(j);
    (&mut lo[i], &mut hi[0])
}

/// Extends the unit columns of `q` into a full orthonormal basis of `R^dim`
/// using Householder reflections. Zeroed columns (negligible singular
/// values) are always a suffix because singular values are sorted.
fn complete_basis<T: Scalar>(q: &DenseMatrix<T>, dim: usize) -> DenseMatrix<T> {
    let p = q.cols();
    let keep: Vec<usize> = (0..p)
        .take_while(|&k| {
            let c = q.column(k);
            (dot(&c, &c).sqrt() - T::one()).abs() < T::lit(1e-6)
        })
        .collect();
    let mut out = DenseMatrix::zeros(dim, dim);
    for (slot, &k) in keep.iter().enumerate() {
        out.set_column(slot, &q.column(k));
    }
    // Householder QR of the kept block; the trailing columns of Q span the complement.
    let r = keep.len();
    let mut work: Vec<Vec<T>> = (0..r).map(|k| q.column(keep[k])).collect();
    let mut reflectors: Vec<Vec<T>> = Vec::with_capacity(r);
    for k in 0..r {
        let x = &work[k];
        let mut vk: Vec<T> = vec![T::zero(); dim];
        let tail_norm = x[k..].iter().map(|&t| t * t).sum::<T>().sqrt();
        let alpha = if x[k] >= T::zero() { -tail_norm } else { tail_norm };
        vk[k..dim].copy_from_slice(&x[k..dim]);
        vk[k] -= alpha;
        let vn = dot(&vk, &vk);
        if vn > T::zero() {
            for col in work.iter_mut().skip(k) {
                let f = T::lit(2.0) * dot(&vk, col) / vn;
                for (c, &h) in col.iter_mut().zip(&vk) {
                    *c -= f * h;
                }
            }
        }
        reflectors.push(vk);
    }
    for e in r..dim {
        let mut col = vec![T::zero(); dim];
        col[e] = T::one();
        for vk in reflectors.iter().rev() {
            let vn = dot(vk, vk);
            if vn > T::zero() {
                let f = T::lit(2.0) * dot(vk, &col) / vn;
                for (c, &h) in col.iter_mut().zip(vk) {
                    *c -= f * h;
                }
            }
        }
        out.set_column(e, &col);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn orthogonality_error(q: &DenseMatrix<f64>) -> f64 {
        q.transpose()
            .matmul(q)
            .sub(&DenseMatrix::identity(q.cols()))
            .frobenius_norm()
    }

    #[test]
    fn diagonal_matrix() {
        let a = DenseMatrix::from_rows(&[[3.0, 0.0], [0.0, 1.0]]).unwrap();
        let r = svd(&a).unwrap();
        assert_eq!(r.sigma, vec![3.0, 1.0]);
        assert_eq!(r.numerical_rank, 2);
    }

    #[test]
    fn ascending_diagonal_gets_sorted() {
        let a = DenseMatrix::from_rows(&[[1.0, 0.0], [0.0, 3.0]]).unwrap();
        let r = svd(&a).unwrap();
        assert_eq!(r.sigma, vec![3.0, 1.0]);
        assert!(r.reconstruct().sub(&a).frobenius_norm() < 1e-15);
    }

    #[test]
    fn permutation_matrix() {
        let a = DenseMatrix::from_rows(&[[0.0f64, 1.0], [1.0, 0.0]]).unwrap();
        let r = svd(&a).unwrap();
        assert!((r.sigma[0] - 1.0).abs() < 1e-15 && (r.sigma[1] - 1.0).abs() < 1e-15);
    }

    fn random_orthonormal(rng: &mut ChaCha8Rng, dim: usize, k: usize) -> DenseMatrix<f64> {
        // Gram-Schmidt on random vectors, done twice for stability
        let mut cols: Vec<Vec<f64>> = Vec::new();
        while cols.len() < k {
            let mut v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            for _ in 0..2 {
                for c in &cols {
                    let d = dot(&v, c);
                    v.iter_mut().zip(c).for_each(|(x, y)| *x -= d * y);
                }
            }
            let n = dot(&v, &v).sqrt();
            v.iter_mut().for_each(|x| *x /= n);
            cols.push(v);
        }
        let mut q = DenseMatrix::zeros(dim, k);
        for (j, c) in cols.iter().enumerate() {
            q.set_column(j, c);
        }
        q
    }

    #[test]
    fn recovers_constructed_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let sig = [5.0f64, 2.0, 0.1];
        let u = random_orthonormal(&mut rng, 7, 3);
        let v = random_orthonormal(&mut rng, 5, 3);
        let mut b = DenseMatrix::<f64>::zeros(7, 5);
        for (k, &s) in sig.iter().enumerate() {
            for i in 0..7 {
                for j in 0..5 {
                    b[(i, j)] += s * u[(i, k)] * v[(j, k)];
                }
            }
        }
        let r = svd(&b).unwrap();
        for (k, &s) in sig.iter().enumerate() {
            assert!((r.sigma[k] - s).abs() <= 1e-12 * s, "{} vs {}", r.sigma[k], s);
        }
        assert_eq!(r.numerical_rank, 3);
        assert!(orthogonality_error(&r.u) <= 1e-12);
        assert!(orthogonality_error(&r.v) <= 1e-12);
        assert!(r.reconstruct().sub(&b).frobenius_norm() <= 1e-12 * b.frobenius_norm());
    }

    #[test]
    fn wide_and_tall_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for &(m, n) in &[(4, 9), (9, 4), (1, 5), (5, 1), (6, 6)] {
            let a = DenseMatrix::from_fn(m, n, |_, _| rng.gen_range(-1.0..1.0));
            let r = svd(&a).unwrap();
            assert_eq!((r.u.rows(), r.u.cols()), (m, m));
            assert_eq!((r.v.rows(), r.v.cols()), (n, n));
            assert!(r.reconstruct().sub(&a).frobenius_norm() <= 1e-12 * a.frobenius_norm());
            assert!(orthogonality_error(&r.u) <= 1e-12, "U for {m}x{n}");
            assert!(orthogonality_error(&r.v) <= 1e-12, "V for {m}x{n}");
            assert!(r.sigma.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn zero_matrix() {
        let a = DenseMatrix::<f64>::zeros(3, 2);
        let r = svd(&a).unwrap();
        assert_eq!(r.sigma, vec![0.0, 0.0]);
        assert_eq!(r.numerical_rank, 0);
        assert!(orthogonality_error(&r.u) <= 1e-12);
    }

    #[test]
    fn rejects_non_finite() {
        let a = DenseMatrix::from_rows(&[[1.0, f64::NAN]]).unwrap();
        assert_eq!(svd(&a).unwrap_err(), Error::NonFinite);
    }

    #[test]
    fn single_precision_diagonal() {
        let a = DenseMatrix::from_rows(&[[0.0f32, 2.0], [0.5, 0.0]]).unwrap();
        let r = svd(&a).unwrap();
        assert!((r.sigma[0] - 2.0).abs() < 1e-6 && (r.sigma[1] - 0.5).abs() < 1e-6);
    }
}
