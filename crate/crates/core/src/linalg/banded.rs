//! Banded LU with partial pivoting behind a reverse Cuthill–McKee ordering.
//!
//! Used for the assembled systems that are too large for a dense
//! factorization (Taylor–Hood on the finest convergence level has close to
//! ten thousand unknowns). Pivoting follows the usual band scheme: row
//! interchanges stay within `kl` rows, which widens the upper band of `U`
//! to `kl + ku`.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::linalg::decomp::PIVOT_TOL;
use crate::linalg::CsrMatrix;
use crate::scalar::Scalar;

/// Reverse Cuthill–McKee permutation of the symmetrized sparsity pattern.
/// `perm[new] = old`.
pub fn reverse_cuthill_mckee<T: Scalar>(a: &CsrMatrix<T>) -> Vec<usize> {
    let n = a.rows();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, j, _) in a.iter() {
        if i != j {
            adj[i].push(j);
            adj[j].push(i);
        }
    }
    for nb in adj.iter_mut() {
        nb.sort_unstable();
        nb.dedup();
    }
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&v| degree[v]);
    for &seed in &by_degree {
        if visited[seed] {
            continue;
        }
        let start = pseudo_peripheral(seed, &adj, &degree);
        let mut queue = VecDeque::new();
        visited[start] = true;
        queue.push_back(start);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = adj[v].iter().copied().filter(|&w| !visited[w]).collect();
            next.sort_by_key(|&w| degree[w]);
            for w in next {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

// A few rounds of the George–Liu search for a node of large eccentricity.
fn pseudo_peripheral(seed: usize, adj: &[Vec<usize>], degree: &[usize]) -> usize {
    let mut root = seed;
    let mut ecc = 0;
    for _ in 0..8 {
        let levels = bfs_levels(root, adj);
        let depth = *levels.iter().filter_map(|l| *l).collect::<Vec<_>>().iter().max().unwrap_or(&0);
        if depth <= ecc && ecc > 0 {
            break;
        }
        ecc = depth;
        let candidate = levels
            .iter()
            .enumerate()
            .filter(|(_, l)| **l == Some(depth))
            .map(|(v, _)| v)
            .min_by_key(|&v| degree[v]);
        match candidate {
            Some(c) if c != root => root = c,
            _ => break,
        }
    }
    root
}

fn bfs_levels(root: usize, adj: &[Vec<usize>]) -> Vec<Option<usize>> {
    let mut level = vec![None; adj.len()];
    level[root] = Some(0);
    let mut queue = VecDeque::from([root]);
    while let Some(v) = queue.pop_front() {
        let lv = level[v].unwrap_or(0);
        for &w in &adj[v] {
            if level[w].is_none() {
                level[w] = Some(lv + 1);
                queue.push_back(w);
            }
        }
    }
    level
}

/// LU factors of a permuted band matrix.
#[derive(Debug, Clone)]
pub struct BandedLu<T> {
    n: usize,
    kl: usize,
    // row i stores absolute columns [i - kl, i + kl + ku]
    width: usize,
    data: Vec<T>,
    pivots: Vec<usize>,
    perm: Vec<usize>,
}

impl<T: Scalar> BandedLu<T> {
    /// Factorizes `a` after a reverse Cuthill–McKee symmetric permutation.
    pub fn new(a: &CsrMatrix<T>) -> Result<Self> {
        let n = a.rows();
        if n != a.cols() {
            return Err(Error::DimensionMismatch("banded LU of a non-square matrix".into()));
        }
        if a.values().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        let perm = reverse_cuthill_mckee(a);
        let mut inv = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let (mut kl, mut ku) = (0usize, 0usize);
        for (i, j, _) in a.iter() {
            let (pi, pj) = (inv[i], inv[j]);
            if pi > pj {
                kl = kl.max(pi - pj);
            } else {
                ku = ku.max(pj - pi);
            }
        }
        let width = 2 * kl + ku + 1;
        let mut data = vec![T::zero(); n * width];
        let mut colsq = vec![T::zero(); n];
        for (i, j, v) in a.iter() {
            let (pi, pj) = (inv[i], inv[j]);
            data[pi * width + (pj + kl - pi)] += v;
            colsq[pj] += v * v;
        }
        let scale = colsq.into_iter().fold(T::zero(), T::max).sqrt();
        let tol = T::rel_tol(PIVOT_TOL) * scale;
        let mut lu = Self {
            n,
            kl,
            width,
            data,
            pivots: vec![0; n],
            perm,
        };
        lu.factor(tol, scale)?;
        Ok(lu)
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j + self.kl - i < self.width);
        i * self.width + (j + self.kl - i)
    }

    fn factor(&mut self, tol: T, scale: T) -> Result<()> {
        let (n, kl) = (self.n, self.kl);
        let ku_total = self.width - 1 - kl; // kl + ku
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let mut p = k;
            let mut pmax = T::zero();
            for i in k..=last_row {
                let v = self.data[self.idx(i, k)].abs();
                if v > pmax {
                    pmax = v;
                    p = i;
                }
            }
            if pmax <= tol || scale == T::zero() {
                return Err(Error::SingularMatrix {
                    step: k,
                    pivot: pmax.to_f64_lossy(),
                });
            }
            self.pivots[k] = p;
            let last_col = (k + ku_total).min(n - 1);
            if p != k {
                for j in k..=last_col {
                    let (a, b) = (self.idx(k, j), self.idx(p, j));
                    self.data.swap(a, b);
                }
            }
            let pivot = self.data[self.idx(k, k)];
            for i in (k + 1)..=last_row {
                let ik = self.idx(i, k);
                let l = self.data[ik] / pivot;
                self.data[ik] = l;
                if l == T::zero() {
                    continue;
                }
                for j in (k + 1)..=last_col {
                    let kj = self.data[self.idx(k, j)];
                    let ij = self.idx(i, j);
                    self.data[ij] -= l * kj;
                }
            }
        }
        Ok(())
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.width - 1 - 2 * self.kl)
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let (n, kl) = (self.n, self.kl);
        assert_eq!(b.len(), n, "rhs length");
        let ku_total = self.width - 1 - kl;
        let mut x: Vec<T> = self.perm.iter().map(|&old| b[old]).collect();
        for k in 0..n {
            let p = self.pivots[k];
            x.swap(k, p);
            let xk = x[k];
            if xk == T::zero() {
                continue;
            }
            for i in (k + 1)..=(k + kl).min(n.saturating_sub(1)) {
                x[i] -= self.data[self.idx(i, k)] * xk;
            }
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in (i + 1)..=(i + ku_total).min(n - 1) {
                s -= self.data[self.idx(i, j)] * x[j];
            }
            x[i] = s / self.data[self.idx(i, i)];
        }
        let mut out = vec![T::zero(); n];
        for (new, &old) in self.perm.iter().enumerate() {
            out[old] = x[new];
        }
        out
    }
}
