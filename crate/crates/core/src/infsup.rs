//! Discrete inf-sup constants from the singular values of the coupling
//! block, with spurious pressure mode extraction.
//!
//! Rows of `B` index pressure dofs and columns index free velocity dofs.
//! In the weighted variant the norms are `X = L·Lᵀ` (velocity) and
//! `M = R·Rᵀ` (pressure) and the constant is the smallest positive singular
//! value of `R⁻¹·B·L⁻ᵀ`.

use std::fmt;
use std::str::FromStr;

use crate::assembly::{divergence, mass, stiffness};
use crate::error::{Error, Result};
use crate::fespace::{ElementKind, FeSpace};
use crate::linalg::decomp::{backward_substitution_transposed, left_solve_lower, right_solve_lower_transposed};
use crate::linalg::{cholesky, dot, norm2, svd, svd_thin, DenseMatrix, SvdResult};
use crate::mesh::Mesh;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormMode {
    Euclidean,
    Weighted,
}

impl NormMode {
    pub fn name(self) -> &'static str {
        match self {
            Self::Euclidean => "euclidean",
            Self::Weighted => "weighted",
        }
    }
}

impl fmt::Display for NormMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for NormMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" => Ok(Self::Euclidean),
            "weighted" => Ok(Self::Weighted),
            _ => Err(Error::InvalidParameter(format!(
                "unknown norm mode '{s}' (expected euclidean or weighted)"
            ))),
        }
    }
}

/// Velocity/pressure pairs available for inf-sup studies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementPair {
    TaylorHood,
    Mini,
    P2P0,
    P1P1,
    P1P0,
}

impl ElementPair {
    pub const NAMES: [&'static str; 5] = ["th", "mini", "p2p0", "p1p1", "p1p0"];
    pub const ALL: [ElementPair; 5] = [Self::TaylorHood, Self::Mini, Self::P2P0, Self::P1P1, Self::P1P0];

    pub fn name(self) -> &'static str {
        match self {
            Self::TaylorHood => "th",
            Self::Mini => "mini",
            Self::P2P0 => "p2p0",
            Self::P1P1 => "p1p1",
            Self::P1P0 => "p1p0",
        }
    }

    pub fn elements(self) -> (ElementKind, ElementKind) {
        match self {
            Self::TaylorHood => (ElementKind::P2, ElementKind::P1),
            Self::Mini => (ElementKind::P1Bubble, ElementKind::P1),
            Self::P2P0 => (ElementKind::P2, ElementKind::P0),
            Self::P1P1 => (ElementKind::P1, ElementKind::P1),
            Self::P1P0 => (ElementKind::P1, ElementKind::P0),
        }
    }
}

impl fmt::Display for ElementPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ElementPair {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|p| p.name() == s).ok_or_else(|| {
            Error::InvalidParameter(format!(
                "unknown element pair '{s}' (expected one of {})",
                Self::NAMES.join(", ")
            ))
        })
    }
}

#[derive(Debug, Clone)]
pub struct InfSupReport<T> {
    /// Smallest singular value above the rank tolerance.
    pub beta: T,
    pub mode: NormMode,
    /// All `min(n_p, n_u)` singular values in decreasing order.
    pub sigma: Vec<T>,
    pub numerical_rank: usize,
    pub rank_tol: T,
    /// `n_p − numerical_rank`.
    pub kernel_dim_pressure: usize,
    /// Pressure coefficients of the singular vector achieving `beta`.
    pub worst_pressure_mode: Vec<T>,
    /// Pressure coefficients spanning the kernel of `Bᵀ`, one per column.
    pub pressure_kernel: DenseMatrix<T>,
    pub pair: String,
    pub h: T,
}

impl<T: Scalar> InfSupReport<T> {
    pub fn n_pressure(&self) -> usize {
        self.pressure_kernel.rows()
    }

    /// Angle between `q` and the pressure kernel, in radians.
    pub fn kernel_angle(&self, q: &[T]) -> T {
        let basis = orthonormalize(&self.pressure_kernel);
        let nq = norm2(q);
        if nq == T::zero() {
            return T::zero();
        }
        let mut proj2 = T::zero();
        for k in 0..basis.cols() {
            let c = dot(&basis.column(k), q) / nq;
            proj2 += c * c;
        }
        proj2.min(T::one()).sqrt().acos()
    }

    fn labelled(mut self, pair: &str, h: T) -> Self {
        self.pair = pair.to_string();
        self.h = h;
        self
    }
}

/// Inf-sup constant with Euclidean norms on both sides.
pub fn infsup_euclidean<T: Scalar>(b: &DenseMatrix<T>) -> Result<InfSupReport<T>> {
    let (sigma, rank, rank_tol, left) = pressure_side_svd(b)?;
    Ok(assemble_report(NormMode::Euclidean, sigma, rank, rank_tol, left))
}

/// Inf-sup constant in the norms induced by `x_norm` (velocity) and
/// `m_norm` (pressure).
pub fn infsup_weighted<T: Scalar>(
    b: &DenseMatrix<T>,
    x_norm: &DenseMatrix<T>,
    m_norm: &DenseMatrix<T>,
) -> Result<InfSupReport<T>> {
    let (n_p, n_u) = (b.rows(), b.cols());
    if x_norm.rows() != n_u || x_norm.cols() != n_u || m_norm.rows() != n_p || m_norm.cols() != n_p {
        return Err(Error::DimensionMismatch(format!(
            "B is {n_p}x{n_u}, X is {}x{}, M is {}x{}",
            x_norm.rows(),
            x_norm.cols(),
            m_norm.rows(),
            m_norm.cols()
        )));
    }
    let l = cholesky(x_norm)?;
    let r = cholesky(m_norm)?;
    let w = left_solve_lower(&r, &right_solve_lower_transposed(b, &l));
    let (sigma, rank, rank_tol, left) = pressure_side_svd(&w)?;
    // y = Rᵀ q maps back to q = R⁻ᵀ y
    let mut mapped = DenseMatrix::zeros(n_p, left.cols());
    for k in 0..left.cols() {
        mapped.set_column(k, &backward_substitution_transposed(&r, &left.column(k)));
    }
    Ok(assemble_report(NormMode::Weighted, sigma, rank, rank_tol, mapped))
}

// Singular values plus a full orthonormal basis of the pressure (row) side.
fn pressure_side_svd<T: Scalar>(b: &DenseMatrix<T>) -> Result<(Vec<T>, usize, T, DenseMatrix<T>)> {
    let res: SvdResult<T> = if b.rows() < b.cols() { svd_thin(b)? } else { svd(b)? };
    Ok((res.sigma, res.numerical_rank, res.rank_tol, res.u))
}

fn assemble_report<T: Scalar>(
    mode: NormMode,
    sigma: Vec<T>,
    rank: usize,
    rank_tol: T,
    left: DenseMatrix<T>,
) -> InfSupReport<T> {
    let n_p = left.rows();
    let beta = rank.checked_sub(1).map_or(T::zero(), |r| sigma[r]);
    let worst = match rank.checked_sub(1) {
        Some(r) => left.column(r),
        None => vec![T::zero(); n_p],
    };
    let kernel_cols: Vec<usize> = (rank..n_p).collect();
    let all_rows: Vec<usize> = (0..n_p).collect();
    InfSupReport {
        beta,
        mode,
        sigma,
        numerical_rank: rank,
        rank_tol,
        kernel_dim_pressure: n_p - rank,
        worst_pressure_mode: worst,
        pressure_kernel: left.select(&all_rows, &kernel_cols),
        pair: String::new(),
        h: T::zero(),
    }
}

// Modified Gram–Schmidt, applied twice; dependent columns are dropped.
fn orthonormalize<T: Scalar>(a: &DenseMatrix<T>) -> DenseMatrix<T> {
    let mut kept: Vec<Vec<T>> = Vec::new();
    for k in 0..a.cols() {
        let mut v = a.column(k);
        let n0 = norm2(&v);
        if n0 == T::zero() {
            continue;
        }
        for _ in 0..2 {
            for q in &kept {
                let c = dot(q, &v);
                v.iter_mut().zip(q).for_each(|(x, &y)| *x -= c * y);
            }
        }
        let n = norm2(&v);
        if n > T::rel_tol(1e-10) * n0 {
            v.iter_mut().for_each(|x| *x /= n);
            kept.push(v);
        }
    }
    let mut out = DenseMatrix::zeros(a.rows(), kept.len());
    for (k, v) in kept.iter().enumerate() {
        out.set_column(k, v);
    }
    out
}

/// Coupling block and norm matrices of a pair on a mesh.
#[derive(Debug, Clone)]
pub struct PairOperators<T> {
    /// `n_p × n_free` divergence block.
    pub b: DenseMatrix<T>,
    /// Vector stiffness on free velocity dofs.
    pub x_norm: DenseMatrix<T>,
    /// Pressure mass.
    pub m_norm: DenseMatrix<T>,
}

pub fn pair_operators<T: Scalar>(pair: ElementPair, mesh: &Mesh<T>) -> PairOperators<T> {
    let (vk, pk) = pair.elements();
    let v_space = FeSpace::vector(mesh, vk);
    let p_space = FeSpace::scalar(mesh, pk);
    let free = v_space.free_dofs();
    let all_p: Vec<usize> = (0..p_space.n_dofs()).collect();
    let b = divergence(&v_space, &p_space).select(&all_p, &free).to_dense();
    let x_norm = stiffness(&v_space).select(&free, &free).to_dense();
    let m_norm = mass(&p_space).to_dense();
    PairOperators { b, x_norm, m_norm }
}

/// Inf-sup report of a pair on the `n × n` unit-square mesh.
pub fn pair_report<T: Scalar>(pair: ElementPair, n: usize, mode: NormMode) -> Result<InfSupReport<T>> {
    let mesh = Mesh::unit_square(n)?;
    let ops = pair_operators(pair, &mesh);
    let report = match mode {
        NormMode::Euclidean => infsup_euclidean(&ops.b)?,
        NormMode::Weighted => infsup_weighted(&ops.b, &ops.x_norm, &ops.m_norm)?,
    };
    Ok(report.labelled(pair.name(), mesh.h()))
}

/// Fraction of interior edges across which the pressure field changes sign.
///
/// For cellwise constants the two neighbouring cells are compared; for nodal
/// fields the two edge endpoints.
pub fn alternation_score<T: Scalar>(space: &FeSpace<'_, T>, p: &[T]) -> T {
    let mesh = space.mesh();
    let mut interior = 0usize;
    let mut changes = 0usize;
    for e in mesh.edges() {
        if e.is_boundary() {
            continue;
        }
        interior += 1;
        let (a, b) = match space.kind() {
            ElementKind::P0 => (p[e.triangles[0]], p[e.triangles[1]]),
            _ => (p[e.nodes[0]], p[e.nodes[1]]),
        };
        if a * b < T::zero() {
            changes += 1;
        }
    }
    if interior == 0 {
        T::zero()
    } else {
        T::from_count(changes) / T::from_count(interior)
    }
}

/// Alternation score of a report's worst mode on the `n × n` mesh.
pub fn mode_alternation<T: Scalar>(pair: ElementPair, n: usize, report: &InfSupReport<T>) -> Result<T> {
    let mesh = Mesh::unit_square(n)?;
    let space = FeSpace::scalar(&mesh, pair.elements().1);
    if space.n_dofs() != report.worst_pressure_mode.len() {
        return Err(Error::DimensionMismatch(format!(
            "mode has {} entries, {} pressure space has {}",
            report.worst_pressure_mode.len(),
            pair,
            space.n_dofs()
        )));
    }
    Ok(alternation_score(&space, &report.worst_pressure_mode))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::sym_eig;

    #[test]
    fn diagonal_extension() {
        let b = DenseMatrix::<f64>::from_rows(&[[3.0, 0.0, 0.0], [0.0, 1.0, 0.0]]).unwrap();
        let r = infsup_euclidean(&b).unwrap();
        assert!((r.beta - 1.0).abs() < 1e-14);
        assert_eq!(r.numerical_rank, 2);
        assert_eq!(r.kernel_dim_pressure, 0);
    }

    #[test]
    fn explicit_kernel() {
        let b = DenseMatrix::<f64>::from_rows(&[[1.0, 0.0], [0.0, 0.0]]).unwrap();
        let r = infsup_euclidean(&b).unwrap();
        assert!((r.beta - 1.0).abs() < 1e-14);
        assert_eq!(r.kernel_dim_pressure, 1);
        assert!(r.kernel_angle(&[0.0, 1.0]) < 1e-12);
        assert!((r.kernel_angle(&[1.0, 0.0]) - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn injected_spectrum_respects_rank_tolerance() {
        // orthogonal factors from rotations
        let rot = |t: f64| {
            let (s, c) = t.sin_cos();
            DenseMatrix::from_rows(&[[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]).unwrap()
        };
        let rot2 = |t: f64| {
            let (s, c) = t.sin_cos();
            DenseMatrix::from_rows(&[[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]]).unwrap()
        };
        let u = rot(0.3).matmul(&rot2(1.1));
        let v = rot2(-0.7).matmul(&rot(2.0));
        let s = DenseMatrix::from_diagonal(3, 3, &[5.0, 2.0, 1e-14]);
        let b = u.matmul(&s).matmul(&v.transpose());
        let r = infsup_euclidean(&b).unwrap();
        assert_eq!(r.numerical_rank, 2);
        assert!((r.beta - 2.0).abs() < 1e-12);
        assert_eq!(r.kernel_dim_pressure, 1);
    }

    #[test]
    fn weighted_with_identity_norms_reduces_to_euclidean() {
        let m = DenseMatrix::<f64>::from_rows(&[[4.0, 1.0, 0.0], [1.0, 3.0, 1.0], [0.0, 1.0, 2.0]]).unwrap();
        let id = DenseMatrix::identity(3);
        let w = infsup_weighted(&m, &id, &id).unwrap();
        let smallest = sym_eig(&m)
            .unwrap()
            .values
            .iter()
            .map(|x| x.abs())
            .fold(f64::INFINITY, f64::min);
        assert!((w.beta - smallest).abs() < 1e-12);
    }

    #[test]
    fn weighted_propagates_cholesky_failure() {
        let b = DenseMatrix::<f64>::identity(2);
        let bad = DenseMatrix::from_rows(&[[1.0, 2.0], [2.0, 1.0]]).unwrap();
        assert!(matches!(
            infsup_weighted(&b, &bad, &DenseMatrix::identity(2)),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn euclidean_matches_block_eigenvalues() {
        let mesh = Mesh::<f64>::unit_square(3).unwrap();
        let ops = pair_operators(ElementPair::TaylorHood, &mesh);
        let r = infsup_euclidean(&ops.b).unwrap();
        let (n_p, n_u) = (ops.b.rows(), ops.b.cols());
        let block = DenseMatrix::from_fn(n_u + n_p, n_u + n_p, |i, j| {
            if i < n_u && j >= n_u {
                ops.b[(j - n_u, i)]
            } else if i >= n_u && j < n_u {
                ops.b[(i - n_u, j)]
            } else {
                0.0
            }
        });
        let mut pos: Vec<f64> = sym_eig(&block).unwrap().values.into_iter().filter(|&x| x > 1e-9).collect();
        pos.sort_by(|a, b| b.partial_cmp(a).unwrap());
        assert_eq!(pos.len(), r.numerical_rank);
        for (a, b) in pos.iter().zip(&r.sigma) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn constant_pressure_is_in_the_kernel_for_every_pair() {
        let mesh = Mesh::<f64>::unit_square(3).unwrap();
        for pair in ElementPair::ALL {
            let ops = pair_operators(pair, &mesh);
            let ones = vec![1.0; ops.b.rows()];
            for mode in [NormMode::Euclidean, NormMode::Weighted] {
                let r = match mode {
                    NormMode::Euclidean => infsup_euclidean(&ops.b).unwrap(),
                    NormMode::Weighted => infsup_weighted(&ops.b, &ops.x_norm, &ops.m_norm).unwrap(),
                };
                assert!(r.kernel_dim_pressure >= 1, "{pair} {mode}");
                assert!(r.kernel_angle(&ones) < 1e-8, "{pair} {mode}: {}", r.kernel_angle(&ones));
                // the worst mode is not the constant
                let c = dot(&r.worst_pressure_mode, &ones) / (norm2(&r.worst_pressure_mode) * norm2(&ones));
                assert!(c.abs() < 1e-6, "{pair} {mode}");
            }
        }
    }

    #[test]
    fn alternation_of_checkerboard_and_constant() {
        let mesh = Mesh::<f64>::unit_square(4).unwrap();
        let p0 = FeSpace::scalar(&mesh, ElementKind::P0);
        let ones = vec![1.0; p0.n_dofs()];
        assert_eq!(alternation_score(&p0, &ones), 0.0);
        // every interior edge separates a lower and an upper triangle
        let board: Vec<f64> = (0..p0.n_dofs()).map(|t| if t % 2 == 0 { 1.0 } else { -1.0 }).collect();
        assert_eq!(alternation_score(&p0, &board), 1.0);
    }

    #[test]
    fn names_round_trip() {
        for pair in ElementPair::ALL {
            assert_eq!(pair.name().parse::<ElementPair>().unwrap(), pair);
        }
        assert!("q2q1".parse::<ElementPair>().is_err());
        assert_eq!("weighted".parse::<NormMode>().unwrap(), NormMode::Weighted);
    }
}
