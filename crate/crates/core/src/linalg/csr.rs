//! Compressed sparse row storage and triplet assembly.

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::scalar::Scalar;

/// Accumulates `(row, col, value)` entries; duplicates are summed on
/// conversion.
#[derive(Debug, Clone)]
pub struct Triplets<T> {
    rows: usize,
    cols: usize,
    entries: Vec<(usize, usize, T)>,
}

impl<T: Scalar> Triplets<T> {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            entries: Vec::new(),
        }
    }

    pub fn with_capacity(rows: usize, cols: usize, cap: usize) -> Self {
        Self {
            rows,
            cols,
            entries: Vec::with_capacity(cap),
        }
    }

    #[inline]
    pub fn push(&mut self, row: usize, col: usize, value: T) {
        debug_assert!(row < self.rows && col < self.cols);
        self.entries.push((row, col, value));
    }

    /// Copies every stored entry of `m`, scaled, at the given offset.
    pub fn push_block(&mut self, m: &CsrMatrix<T>, row_off: usize, col_off: usize, scale: T) {
        for (i, j, v) in m.iter() {
            self.push(row_off + i, col_off + j, scale * v);
        }
    }

    /// Copies `mᵀ`, scaled, at the given offset.
    pub fn push_block_transposed(
        &mut self,
        m: &CsrMatrix<T>,
        row_off: usize,
        col_off: usize,
        scale: T,
    ) {
        for (i, j, v) in m.iter() {
            self.push(row_off + j, col_off + i, scale * v);
        }
    }

    pub fn into_csr(self) -> CsrMatrix<T> {
        CsrMatrix::from_triplets(self.rows, self.cols, &self.entries)
            .expect("triplets are range-checked on push")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix<T> {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<T>,
}

impl<T: Scalar> CsrMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            row_ptr: vec![0; rows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![T::one(); n])
    }

    pub fn from_diagonal(diag: &[T]) -> Self {
        let n = diag.len();
        Self {
            rows: n,
            cols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: diag.to_vec(),
        }
    }

    /// Builds a sorted CSR matrix, summing duplicate coordinates.
    pub fn from_triplets(rows: usize, cols: usize, entries: &[(usize, usize, T)]) -> Result<Self> {
        let mut counts = vec![0usize; rows + 1];
        for &(i, j, _) in entries {
            if i >= rows || j >= cols {
                return Err(Error::IndexOutOfRange {
                    row: i,
                    col: j,
                    rows,
                    cols,
                });
            }
            counts[i + 1] += 1;
        }
        for i in 0..rows {
            counts[i + 1] += counts[i];
        }
        // bucket by row, then sort and merge each row
        let mut next = counts.clone();
        let mut buf: Vec<(usize, T)> = vec![(0, T::zero()); entries.len()];
        for &(i, j, v) in entries {
            buf[next[i]] = (j, v);
            next[i] += 1;
        }
        let mut row_ptr = Vec::with_capacity(rows + 1);
        let mut col_idx = Vec::with_capacity(entries.len());
        let mut values = Vec::with_capacity(entries.len());
        row_ptr.push(0);
        for i in 0..rows {
            let row = &mut buf[counts[i]..counts[i + 1]];
            row.sort_unstable_by_key(|&(j, _)| j);
            let mut iter = row.iter().copied();
            if let Some((mut cj, mut cv)) = iter.next() {
                for (j, v) in iter {
                    if j == cj {
                        cv += v;
                    } else {
                        col_idx.push(cj);
                        values.push(cv);
                        cj = j;
                        cv = v;
                    }
                }
                col_idx.push(cj);
                values.push(cv);
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Self {
            rows,
            cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn from_dense(m: &DenseMatrix<T>) -> Self {
        let mut t = Triplets::new(m.rows(), m.cols());
        for i in 0..m.rows() {
            for (j, &v) in m.row(i).iter().enumerate() {
                if v != T::zero() {
                    t.push(i, j, v);
                }
            }
        }
        t.into_csr()
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[T]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => T::zero(),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.rows).flat_map(move |i| {
            let (cols, vals) = self.row(i);
            cols.iter().zip(vals).map(move |(&j, &v)| (i, j, v))
        })
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.cols, "matvec dimension mismatch");
        (0..self.rows)
            .map(|i| {
                let (cols, vals) = self.row(i);
                cols.iter().zip(vals).map(|(&j, &v)| v * x[j]).sum()
            })
            .collect()
    }

    /// `selfᵀ · x`
    pub fn tr_matvec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.rows, "tr_matvec dimension mismatch");
        let mut y = vec![T::zero(); self.cols];
        for (i, j, v) in self.iter() {
            y[j] += v * x[i];
        }
        y
    }

    /// `xᵀ · self · y`
    pub fn bilinear(&self, x: &[T], y: &[T]) -> T {
        let ay = self.matvec(y);
        x.iter().zip(&ay).map(|(&a, &b)| a * b).sum()
    }

    pub fn transpose(&self) -> Self {
        let entries: Vec<_> = self.iter().map(|(i, j, v)| (j, i, v)).collect();
        Self::from_triplets(self.cols, self.rows, &entries).expect("in range")
    }

    pub fn to_dense(&self) -> DenseMatrix<T> {
        let mut d = DenseMatrix::zeros(self.rows, self.cols);
        for (i, j, v) in self.iter() {
            d[(i, j)] += v;
        }
        d
    }

    pub fn scale(&self, s: T) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }

    /// `a·self + b·other`
    pub fn add_scaled(&self, a: T, other: &Self, b: T) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut t = Triplets::with_capacity(self.rows, self.cols, self.nnz() + other.nnz());
        t.push_block(self, 0, 0, a);
        t.push_block(other, 0, 0, b);
        t.into_csr()
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).collect()
    }

    pub fn row_sums(&self) -> Vec<T> {
        (0..self.rows).map(|i| self.row(i).1.iter().copied().sum()).collect()
    }

    pub fn frobenius_norm(&self) -> T {
        self.values.iter().map(|&v| v * v).sum::<T>().sqrt()
    }

    /// `‖A − Aᵀ‖_F / ‖A‖_F`
    pub fn asymmetry(&self) -> T {
        if self.rows != self.cols {
            return T::infinity();
        }
        let diff = self.add_scaled(T::one(), &self.transpose(), -T::one());
        let norm = self.frobenius_norm();
        if norm == T::zero() {
            T::zero()
        } else {
            diff.frobenius_norm() / norm
        }
    }

    /// Sub-matrix keeping the listed rows and columns, renumbered in list order.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Self {
        let mut col_map = vec![usize::MAX; self.cols];
        for (k, &j) in cols.iter().enumerate() {
            col_map[j] = k;
        }
        let mut t = Triplets::new(rows.len(), cols.len());
        for (new_i, &i) in rows.iter().enumerate() {
            let (cs, vs) = self.row(i);
            for (&j, &v) in cs.iter().zip(vs) {
                if col_map[j] != usize::MAX {
                    t.push(new_i, col_map[j], v);
                }
            }
        }
        t.into_csr()
    }

    /// `selfᵀ · diag(w) · self`, the weighted Gram matrix of the columns.
    pub fn weighted_gram(&self, weights: &[T]) -> Self {
        assert_eq!(weights.len(), self.rows);
        let mut t = Triplets::new(self.cols, self.cols);
        for (i, &w) in weights.iter().enumerate() {
            let (cols, vals) = self.row(i);
            for (&a, &va) in cols.iter().zip(vals) {
                for (&b, &vb) in cols.iter().zip(vals) {
                    t.push(a, b, w * va * vb);
                }
            }
        }
        t.into_csr()
    }

    /// Drops stored entries with magnitude at most `tol`.
    pub fn pruned(&self, tol: T) -> Self {
        let entries: Vec<_> = self.iter().filter(|&(_, _, v)| v.abs() > tol).collect();
        Self::from_triplets(self.rows, self.cols, &entries).expect("in range")
    }
}

/// Assembles a block matrix from `(block_row, block_col, matrix, scale)`
/// parts given block row heights and block column widths.
pub fn block_matrix<T: Scalar>(
    row_sizes: &[usize],
    col_sizes: &[usize],
    parts: &[(usize, usize, &CsrMatrix<T>, T)],
) -> CsrMatrix<T> {
    let offsets = |sizes: &[usize]| {
        let mut off = vec![0usize; sizes.len() + 1];
        for (k, &s) in sizes.iter().enumerate() {
            off[k + 1] = off[k] + s;
        }
        off
    };
    let ro = offsets(row_sizes);
    let co = offsets(col_sizes);
    let mut t = Triplets::new(ro[row_sizes.len()], co[col_sizes.len()]);
    for &(bi, bj, m, s) in parts {
        assert_eq!(m.rows(), row_sizes[bi], "block ({bi},{bj}) row count");
        assert_eq!(m.cols(), col_sizes[bj], "block ({bi},{bj}) column count");
        t.push_block(m, ro[bi], co[bj], s);
    }
    t.into_csr()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_are_summed() {
        let m = CsrMatrix::from_triplets(1, 1, &[(0, 0, 1.0), (0, 0, 2.0)]).unwrap();
        assert_eq!(m.nnz(), 1);
        assert_eq!(m.get(0, 0), 3.0);
    }

    #[test]
    fn empty_triplets_give_zero_matrix() {
        let m = CsrMatrix::<f64>::from_triplets(2, 2, &[]).unwrap();
        assert_eq!(m.row_ptr(), &[0, 0, 0]);
        assert_eq!(m.to_dense(), DenseMatrix::zeros(2, 2));
    }

    #[test]
    fn off_diagonal_layout() {
        let m = CsrMatrix::from_triplets(2, 2, &[(1, 0, 5.0), (0, 1, 7.0)]).unwrap();
        assert_eq!(
            m.to_dense(),
            DenseMatrix::from_rows(&[[0.0, 7.0], [5.0, 0.0]]).unwrap()
        );
    }

    #[test]
    fn out_of_range_rejected() {
        let err = CsrMatrix::from_triplets(2, 2, &[(2, 0, 1.0)]).unwrap_err();
        assert!(matches!(err, Error::IndexOutOfRange { row: 2, .. }));
    }

    #[test]
    fn columns_sorted_within_rows() {
        let m = CsrMatrix::from_triplets(
            2,
            4,
            &[(0, 3, 1.0), (0, 0, 1.0), (0, 2, 1.0), (1, 1, 1.0), (0, 2, 1.0)],
        )
        .unwrap();
        assert_eq!(m.row(0).0, &[0, 2, 3]);
        assert_eq!(m.get(0, 2), 2.0);
    }

    #[test]
    fn weighted_gram_matches_dense() {
        let a = CsrMatrix::from_triplets(
            3,
            2,
            &[(0, 0, 1.0), (1, 0, 2.0), (1, 1, -1.0), (2, 1, 3.0)],
        )
        .unwrap();
        let w = [2.0, 0.5, 1.0];
        let g = a.weighted_gram(&w).to_dense();
        let ad = a.to_dense();
        let expect = DenseMatrix::from_fn(2, 2, |i, j| {
            (0..3).map(|k| ad[(k, i)] * w[k] * ad[(k, j)]).sum()
        });
        assert_eq!(g, expect);
    }

    #[test]
    fn select_and_transpose() {
        let a = CsrMatrix::from_dense(
            &DenseMatrix::from_rows(&[[1.0, 2.0, 0.0], [0.0, 3.0, 4.0]]).unwrap(),
        );
        let s = a.select(&[1], &[2, 0]);
        assert_eq!(s.to_dense(), DenseMatrix::from_rows(&[[4.0, 0.0]]).unwrap());
        assert_eq!(a.transpose().to_dense(), a.to_dense().transpose());
    }
}
