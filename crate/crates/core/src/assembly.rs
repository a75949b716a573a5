//! Global operators of the discrete problems.
//!
//! Every block system follows `[[A, Bᵀ], [B, −C]]` with
//! `B[q, v] = −(ψ_q, ∇·φ_v)`. Element integrals use the symmetric rules of
//! [`crate::fespace::quadrature`] at the smallest degree that is exact for
//! the integrand on affine triangles (never below [`ASSEMBLY_DEGREE`]).

use crate::error::{Error, Result};
use crate::fespace::{
    edge_gauss, quadrature, shape_gradients, shape_values, ElementKind, FeSpace, QuadratureRule,
    ASSEMBLY_DEGREE, ERROR_DEGREE,
};
use crate::linalg::{dot, lu_solve, norm2, BandedLu, CsrMatrix, Triplets};
use crate::mesh::TriangleGeometry;
use crate::scalar::Scalar;

/// Blocks and loads of a saddle-point problem.
#[derive(Debug, Clone)]
pub struct SaddleSystem<T> {
    pub a: CsrMatrix<T>,
    pub b: CsrMatrix<T>,
    pub c: CsrMatrix<T>,
    /// Replaces `B` in the second block row when the method is not
    /// symmetric.
    pub b_lower: Option<CsrMatrix<T>>,
    pub f: Vec<T>,
    pub g: Vec<T>,
    /// `m_q = ∫ψ_q`; when present, `mᵀp = 0` is appended with a multiplier.
    pub mean_vector: Option<Vec<T>>,
    pub dirichlet_dofs: Vec<usize>,
}

impl<T: Scalar> SaddleSystem<T> {
    pub fn new(a: CsrMatrix<T>, b: CsrMatrix<T>, c: Option<CsrMatrix<T>>, f: Vec<T>, g: Vec<T>) -> Result<Self> {
        let (n_u, n_p) = (a.rows(), b.rows());
        let c = c.unwrap_or_else(|| CsrMatrix::zeros(n_p, n_p));
        if a.cols() != n_u || b.cols() != n_u || c.rows() != n_p || c.cols() != n_p || f.len() != n_u || g.len() != n_p {
            return Err(Error::DimensionMismatch(format!(
                "saddle blocks A {}x{}, B {}x{}, C {}x{}, f {}, g {}",
                a.rows(),
                a.cols(),
                b.rows(),
                b.cols(),
                c.rows(),
                c.cols(),
                f.len(),
                g.len()
            )));
        }
        Ok(Self {
            a,
            b,
            c,
            b_lower: None,
            f,
            g,
            mean_vector: None,
            dirichlet_dofs: Vec::new(),
        })
    }

    pub fn n_u(&self) -> usize {
        self.a.rows()
    }

    pub fn n_p(&self) -> usize {
        self.b.rows()
    }

    /// Total unknown count including the mean multiplier.
    pub fn dim(&self) -> usize {
        self.n_u() + self.n_p() + usize::from(self.mean_vector.is_some())
    }

    pub fn with_mean_constraint(mut self, m: Vec<T>) -> Self {
        assert_eq!(m.len(), self.n_p());
        self.mean_vector = Some(m);
        self
    }

    /// `[[A, Bᵀ], [B, −C]]`, bordered by the mean row and column when present.
    pub fn matrix(&self) -> CsrMatrix<T> {
        let (n_u, n_p) = (self.n_u(), self.n_p());
        let bt = self.b.transpose();
        let lower = self.b_lower.as_ref().unwrap_or(&self.b);
        let mut t = Triplets::with_capacity(self.dim(), self.dim(), 0);
        t.push_block(&self.a, 0, 0, T::one());
        t.push_block(&bt, 0, n_u, T::one());
        t.push_block(lower, n_u, 0, T::one());
        t.push_block(&self.c, n_u, n_u, -T::one());
        if let Some(m) = &self.mean_vector {
            let k = n_u + n_p;
            for (q, &mq) in m.iter().enumerate() {
                if mq != T::zero() {
                    t.push(n_u + q, k, mq);
                    t.push(k, n_u + q, mq);
                }
            }
        }
        t.into_csr()
    }

    pub fn rhs(&self) -> Vec<T> {
        let mut r = self.f.clone();
        r.extend_from_slice(&self.g);
        if self.mean_vector.is_some() {
            r.push(T::zero());
        }
        r
    }

    /// Relative asymmetry of [`SaddleSystem::matrix`].
    pub fn asymmetry(&self) -> T {
        self.matrix().asymmetry()
    }

    /// Symmetric strong elimination: constrained rows and columns become
    /// identity rows, right-hand sides absorb the known values.
    pub fn apply_dirichlet(mut self, dofs: &[usize], values: &[T]) -> Result<Self> {
        if dofs.len() != values.len() {
            return Err(Error::DimensionMismatch("dirichlet dofs and values differ in length".into()));
        }
        let n_u = self.n_u();
        let mut fixed: Vec<Option<T>> = vec![None; n_u];
        for (&d, &v) in dofs.iter().zip(values) {
            if d >= n_u {
                return Err(Error::IndexOutOfRange {
                    row: d,
                    col: 0,
                    rows: n_u,
                    cols: 1,
                });
            }
            fixed[d] = Some(v);
        }
        let known: Vec<T> = fixed.iter().map(|v| v.unwrap_or(T::zero())).collect();
        // move known columns to the right-hand side
        let a_known = self.a.matvec(&known);
        let b_known = self.b_lower.as_ref().unwrap_or(&self.b).matvec(&known);
        for (i, fi) in self.f.iter_mut().enumerate() {
            *fi = match fixed[i] {
                Some(v) => v,
                None => *fi - a_known[i],
            };
        }
        for (gi, bk) in self.g.iter_mut().zip(&b_known) {
            *gi -= *bk;
        }
        let keep = |j: usize| fixed[j].is_none();
        let mut ta = Triplets::new(n_u, n_u);
        for (i, j, v) in self.a.iter() {
            if keep(i) && keep(j) {
                ta.push(i, j, v);
            }
        }
        for (i, f) in fixed.iter().enumerate() {
            if f.is_some() {
                ta.push(i, i, T::one());
            }
        }
        self.a = ta.into_csr();
        let strip = |m: &CsrMatrix<T>| {
            let mut t = Triplets::new(m.rows(), m.cols());
            for (i, j, v) in m.iter() {
                if keep(j) {
                    t.push(i, j, v);
                }
            }
            t.into_csr()
        };
        self.b = strip(&self.b);
        self.b_lower = self.b_lower.as_ref().map(strip);
        let mut all: Vec<usize> = self.dirichlet_dofs.clone();
        all.extend_from_slice(dofs);
        all.sort_unstable();
        all.dedup();
        self.dirichlet_dofs = all;
        Ok(self)
    }
}

/// Systems up to this many unknowns are solved by dense LU on the
/// mean-bordered matrix; larger ones by banded LU with one pinned pressure.
pub const DENSE_SOLVE_LIMIT: usize = 1500;

#[derive(Debug, Clone)]
pub struct SaddleSolution<T> {
    pub u: Vec<T>,
    pub p: Vec<T>,
    /// Multiplier of the mean constraint (zero when pinned).
    pub mean_multiplier: T,
    /// `‖K·x − r‖ / ‖r‖` on the bordered system (absolute when `r = 0`).
    pub residual_norm: T,
}

impl<T: Scalar> SaddleSystem<T> {
    pub fn solve(&self) -> Result<SaddleSolution<T>> {
        let k = self.matrix();
        let r = self.rhs();
        let x = if self.dim() <= DENSE_SOLVE_LIMIT {
            lu_solve(&k.to_dense(), &r)?
        } else {
            self.solve_pinned()?
        };
        let kx = k.matvec(&x);
        let res = norm2(&kx.iter().zip(&r).map(|(&a, &b)| a - b).collect::<Vec<_>>());
        let rn = norm2(&r);
        let residual_norm = if rn > T::zero() { res / rn } else { res };
        let (n_u, n_p) = (self.n_u(), self.n_p());
        Ok(SaddleSolution {
            u: x[..n_u].to_vec(),
            p: x[n_u..n_u + n_p].to_vec(),
            mean_multiplier: x.get(n_u + n_p).copied().unwrap_or(T::zero()),
            residual_norm,
        })
    }

    // Without a mean constraint this is a plain banded solve. With one, the
    // constant pressure is the kernel of the unbordered matrix: fix the
    // pressure dof of largest weight, solve, and shift to zero mean.
    fn solve_pinned(&self) -> Result<Vec<T>> {
        let (n_u, n_p) = (self.n_u(), self.n_p());
        let Some(m) = &self.mean_vector else {
            return Ok(BandedLu::new(&self.matrix())?.solve(&self.rhs()));
        };
        let unbordered = Self {
            mean_vector: None,
            ..self.clone()
        };
        let pin = n_u
            + (0..n_p)
                .max_by(|&i, &j| m[i].abs().partial_cmp(&m[j].abs()).unwrap_or(std::cmp::Ordering::Equal))
                .ok_or_else(|| Error::DimensionMismatch("mean constraint without pressure dofs".into()))?;
        let full = unbordered.matrix();
        let mut t = Triplets::with_capacity(full.rows(), full.cols(), full.nnz());
        for (i, j, v) in full.iter() {
            if i != pin && j != pin {
                t.push(i, j, v);
            }
        }
        t.push(pin, pin, T::one());
        let mut r = unbordered.rhs();
        r[pin] = T::zero();
        let mut x = BandedLu::new(&t.into_csr())?.solve(&r);
        let total: T = m.iter().copied().sum();
        let mean = dot(m, &x[n_u..]) / total;
        for v in &mut x[n_u..] {
            *v -= mean;
        }
        x.push(T::zero());
        Ok(x)
    }
}

/// Solves `k·x = r`: dense LU up to [`DENSE_SOLVE_LIMIT`] unknowns, banded
/// LU on a bandwidth-reducing ordering above.
pub fn solve_linear<T: Scalar>(k: &CsrMatrix<T>, r: &[T]) -> Result<Vec<T>> {
    if k.rows() <= DENSE_SOLVE_LIMIT {
        lu_solve(&k.to_dense(), r)
    } else {
        Ok(BandedLu::new(k)?.solve(r))
    }
}

/// Per-element tabulation of one space's scalar basis at quadrature points.
struct Tabulation<T> {
    jxw: Vec<T>,
    values: Vec<Vec<T>>,
    grads: Vec<Vec<[T; 2]>>,
}

fn tabulate<T: Scalar>(kind: ElementKind, rule: &QuadratureRule<T>, geom: &TriangleGeometry<T>) -> Tabulation<T> {
    Tabulation {
        jxw: rule.weights.iter().map(|&w| w * geom.area).collect(),
        values: rule.points.iter().map(|l| shape_values(kind, l)).collect(),
        grads: rule.points.iter().map(|l| shape_gradients(kind, l, geom)).collect(),
    }
}

fn rule_for<T: Scalar>(degree: usize) -> QuadratureRule<T> {
    quadrature(degree.max(ASSEMBLY_DEGREE)).expect("assembly degrees stay within the tabulated rules")
}

fn grad_degree(kind: ElementKind) -> usize {
    kind.degree().saturating_sub(1)
}

/// Scalar local matrices replicated on each component block.
fn assemble_blockwise<T: Scalar>(
    space: &FeSpace<'_, T>,
    degree: usize,
    mut local: impl FnMut(usize, &Tabulation<T>, usize, usize) -> T,
) -> CsrMatrix<T> {
    let mesh = space.mesh();
    let rule = rule_for::<T>(degree);
    let nl = space.kind().local_dofs();
    let ns = space.n_scalar_dofs();
    let n = space.n_dofs();
    let mut t = Triplets::with_capacity(n, n, mesh.n_triangles() * nl * nl * space.components());
    for k in 0..mesh.n_triangles() {
        let tab = tabulate(space.kind(), &rule, &mesh.geometry(k));
        let dofs = space.scalar_cell_dofs(k);
        for i in 0..nl {
            for j in 0..nl {
                let v = local(k, &tab, i, j);
                for c in 0..space.components() {
                    t.push(c * ns + dofs[i], c * ns + dofs[j], v);
                }
            }
        }
    }
    t.into_csr()
}

/// `(∇u, ∇v)`, block diagonal over components for vector spaces.
pub fn stiffness<T: Scalar>(space: &FeSpace<'_, T>) -> CsrMatrix<T> {
    weighted_stiffness(space, &vec![T::one(); space.mesh().n_triangles()])
}

/// `Σ_K w_K (∇u, ∇v)_K`.
pub fn weighted_stiffness<T: Scalar>(space: &FeSpace<'_, T>, weights: &[T]) -> CsrMatrix<T> {
    assert_eq!(weights.len(), space.mesh().n_triangles());
    assemble_blockwise(space, 2 * grad_degree(space.kind()), |k, tab, i, j| {
        let mut s = T::zero();
        for (q, &w) in tab.jxw.iter().enumerate() {
            let (gi, gj) = (tab.grads[q][i], tab.grads[q][j]);
            s += w * (gi[0] * gj[0] + gi[1] * gj[1]);
        }
        weights[k] * s
    })
}

/// `(u, v)`, block diagonal over components for vector spaces.
pub fn mass<T: Scalar>(space: &FeSpace<'_, T>) -> CsrMatrix<T> {
    assemble_blockwise(space, 2 * space.kind().degree(), |_, tab, i, j| {
        let mut s = T::zero();
        for (q, &w) in tab.jxw.iter().enumerate() {
            s += w * tab.values[q][i] * tab.values[q][j];
        }
        s
    })
}

/// Row sums of the consistent mass matrix.
pub fn lumped_mass<T: Scalar>(space: &FeSpace<'_, T>) -> Vec<T> {
    mass(space).row_sums()
}

/// `B[q, v] = −(ψ_q, ∇·φ_v)`: `n_p` rows, `n_u` columns.
pub fn divergence<T: Scalar>(v_space: &FeSpace<'_, T>, p_space: &FeSpace<'_, T>) -> CsrMatrix<T> {
    assert_eq!(v_space.components(), 2, "velocity space must be a 2-vector space");
    assert!(std::ptr::eq(v_space.mesh(), p_space.mesh()), "spaces must share a mesh");
    let mesh = v_space.mesh();
    let rule = rule_for::<T>(grad_degree(v_space.kind()) + p_space.kind().degree());
    let (nv, np) = (v_space.kind().local_dofs(), p_space.kind().local_dofs());
    let ns = v_space.n_scalar_dofs();
    let mut t = Triplets::with_capacity(p_space.n_dofs(), v_space.n_dofs(), mesh.n_triangles() * nv * np * 2);
    for k in 0..mesh.n_triangles() {
        let geom = mesh.geometry(k);
        let tv = tabulate(v_space.kind(), &rule, &geom);
        let tp = tabulate(p_space.kind(), &rule, &geom);
        let (vd, pd) = (v_space.scalar_cell_dofs(k), p_space.scalar_cell_dofs(k));
        for a in 0..np {
            for j in 0..nv {
                for c in 0..2 {
                    let mut s = T::zero();
                    for (q, &w) in tv.jxw.iter().enumerate() {
                        s += w * tp.values[q][a] * tv.grads[q][j][c];
                    }
                    t.push(pd[a], c * ns + vd[j], -s);
                }
            }
        }
    }
    t.into_csr()
}

/// `Σ_K h_K² (∇p, ∇q)_K` on a continuous P1 pressure space.
pub fn pressure_grad_stab<T: Scalar>(p_space: &FeSpace<'_, T>) -> CsrMatrix<T> {
    let w: Vec<T> = p_space.mesh().h_k().iter().map(|&h| h * h).collect();
    weighted_stiffness(p_space, &w)
}

/// `G[z, p] = (φ_z, ∇ψ_p)` for a vector space `z_space`: `n_z` rows,
/// `n_p` columns.
pub fn grad_coupling<T: Scalar>(p_space: &FeSpace<'_, T>, z_space: &FeSpace<'_, T>) -> CsrMatrix<T> {
    assert_eq!(z_space.components(), 2, "z space must be a 2-vector space");
    let mesh = p_space.mesh();
    let rule = rule_for::<T>(grad_degree(p_space.kind()) + z_space.kind().degree());
    let (nz, np) = (z_space.kind().local_dofs(), p_space.kind().local_dofs());
    let ns = z_space.n_scalar_dofs();
    let mut t = Triplets::with_capacity(z_space.n_dofs(), p_space.n_dofs(), mesh.n_triangles() * nz * np * 2);
    for k in 0..mesh.n_triangles() {
        let geom = mesh.geometry(k);
        let tz = tabulate(z_space.kind(), &rule, &geom);
        let tp = tabulate(p_space.kind(), &rule, &geom);
        let (zd, pd) = (z_space.scalar_cell_dofs(k), p_space.scalar_cell_dofs(k));
        for i in 0..nz {
            for a in 0..np {
                for c in 0..2 {
                    let mut s = T::zero();
                    for (q, &w) in tz.jxw.iter().enumerate() {
                        s += w * tz.values[q][i] * tp.grads[q][a][c];
                    }
                    t.push(c * ns + zd[i], pd[a], s);
                }
            }
        }
    }
    t.into_csr()
}

/// `(f, v)` for a scalar space.
pub fn load_scalar<T: Scalar>(space: &FeSpace<'_, T>, f: impl Fn([T; 2]) -> T) -> Vec<T> {
    assert_eq!(space.components(), 1);
    let mesh = space.mesh();
    let rule = quadrature::<T>(ERROR_DEGREE).expect("tabulated");
    let mut out = vec![T::zero(); space.n_dofs()];
    for k in 0..mesh.n_triangles() {
        let geom = mesh.geometry(k);
        let dofs = space.scalar_cell_dofs(k);
        for (l, w) in rule.iter() {
            let fx = f(geom.map(l)) * w * geom.area;
            for (phi, &d) in shape_values(space.kind(), l).iter().zip(dofs) {
                out[d] += fx * *phi;
            }
        }
    }
    out
}

/// `(f, v)` for a vector space.
pub fn load_vector<T: Scalar>(space: &FeSpace<'_, T>, f: impl Fn([T; 2]) -> [T; 2]) -> Vec<T> {
    assert_eq!(space.components(), 2);
    let mesh = space.mesh();
    let ns = space.n_scalar_dofs();
    let rule = quadrature::<T>(ERROR_DEGREE).expect("tabulated");
    let mut out = vec![T::zero(); space.n_dofs()];
    for k in 0..mesh.n_triangles() {
        let geom = mesh.geometry(k);
        let dofs = space.scalar_cell_dofs(k);
        for (l, w) in rule.iter() {
            let fx = f(geom.map(l));
            let jw = w * geom.area;
            for (phi, &d) in shape_values(space.kind(), l).iter().zip(dofs) {
                out[d] += jw * fx[0] * *phi;
                out[ns + d] += jw * fx[1] * *phi;
            }
        }
    }
    out
}

/// `Σ_K w_K (f, ∇q)_K` for a scalar space.
pub fn grad_load<T: Scalar>(space: &FeSpace<'_, T>, weights: &[T], f: impl Fn([T; 2]) -> [T; 2]) -> Vec<T> {
    assert_eq!(space.components(), 1);
    let mesh = space.mesh();
    let rule = quadrature::<T>(ERROR_DEGREE).expect("tabulated");
    let mut out = vec![T::zero(); space.n_dofs()];
    for k in 0..mesh.n_triangles() {
        let geom = mesh.geometry(k);
        let dofs = space.scalar_cell_dofs(k);
        for (l, w) in rule.iter() {
            let fx = f(geom.map(l));
            let jw = weights[k] * w * geom.area;
            for (g, &d) in shape_gradients(space.kind(), l, &geom).iter().zip(dofs) {
                out[d] += jw * (fx[0] * g[0] + fx[1] * g[1]);
            }
        }
    }
    out
}

/// `∫ψ_q` for every dof of a scalar space.
pub fn mean_vector<T: Scalar>(space: &FeSpace<'_, T>) -> Vec<T> {
    load_scalar(space, |_| T::one())
}

/// Boundary forms of a scalar P1 space, indexed by global dofs.
#[derive(Debug, Clone)]
pub struct BoundaryOperators<T> {
    /// `⟨φ_i, φ_j⟩_Γ`
    pub mass_gamma: CsrMatrix<T>,
    /// `⟨∂φ_j/∂n, φ_i⟩_Γ` (row = test function)
    pub normal_flux: CsrMatrix<T>,
    /// `γ Σ_E (1/h_E) ⟨φ_i, φ_j⟩_E`
    pub penalty: CsrMatrix<T>,
    /// Sorted dofs on Γ.
    pub trace_dofs: Vec<usize>,
}

pub fn boundary_operators<T: Scalar>(space: &FeSpace<'_, T>, gamma_coeff: T) -> Result<BoundaryOperators<T>> {
    if space.kind() != ElementKind::P1 || space.components() != 1 {
        return Err(Error::UnsupportedCombination(format!(
            "boundary operators need a scalar P1 space, got {} with {} components",
            space.kind().label(),
            space.components()
        )));
    }
    let mesh = space.mesh();
    let n = space.n_dofs();
    let gauss = edge_gauss::<T>();
    let (mut tm, mut tn, mut tp) = (Triplets::new(n, n), Triplets::new(n, n), Triplets::new(n, n));
    for e in mesh.boundary_edges() {
        let (len, normal) = mesh.boundary_edge_frame(e);
        let geom = mesh.geometry(e.triangle);
        let tri = mesh.triangles()[e.triangle];
        let ends = [e.a, e.b];
        let mut mloc = [[T::zero(); 2]; 2];
        for &(s, w) in &gauss {
            let phi = [T::one() - s, s];
            for i in 0..2 {
                for j in 0..2 {
                    mloc[i][j] += w * len * phi[i] * phi[j];
                }
            }
        }
        for i in 0..2 {
            for j in 0..2 {
                tm.push(ends[i], ends[j], mloc[i][j]);
                tp.push(ends[i], ends[j], gamma_coeff * mloc[i][j] / len);
            }
        }
        // ∂φ_j/∂n is constant on the edge; ⟨1, φ_i⟩_E = |E|/2
        let half_len = len / T::lit(2.0);
        for (k, &node) in tri.iter().enumerate() {
            let g = geom.grad_lambda[k];
            let dn = g[0] * normal[0] + g[1] * normal[1];
            for &i in &ends {
                tn.push(i, node, half_len * dn);
            }
        }
    }
    Ok(BoundaryOperators {
        mass_gamma: tm.into_csr(),
        normal_flux: tn.into_csr(),
        penalty: tp.into_csr(),
        trace_dofs: mesh.boundary_nodes(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DenseMatrix;
    use crate::mesh::Mesh;

    fn reference_mesh() -> Mesh<f64> {
        Mesh::from_parts(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![[0, 1, 2]]).unwrap()
    }

    fn close(a: &DenseMatrix<f64>, b: &DenseMatrix<f64>, tol: f64) -> bool {
        a.sub(b).max_abs() <= tol
    }

    #[test]
    fn reference_p1_stiffness_and_mass() {
        let m = reference_mesh();
        let s = FeSpace::scalar(&m, ElementKind::P1);
        let k = stiffness(&s).to_dense();
        let expect = DenseMatrix::from_rows(&[[2.0, -1.0, -1.0], [-1.0, 1.0, 0.0], [-1.0, 0.0, 1.0]])
            .unwrap()
            .scale(0.5);
        assert!(close(&k, &expect, 1e-15));
        let mm = mass(&s).to_dense();
        let expect = DenseMatrix::from_rows(&[[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]])
            .unwrap()
            .scale(1.0 / 24.0);
        assert!(close(&mm, &expect, 1e-15));
    }

    #[test]
    fn constants_in_stiffness_kernel() {
        let m = Mesh::<f64>::unit_square(3).unwrap();
        for kind in [ElementKind::P1, ElementKind::P1Bubble, ElementKind::P2] {
            let s = FeSpace::scalar(&m, kind);
            let ones: Vec<f64> = s.interpolate(|_| 1.0);
            let r = stiffness(&s).matvec(&ones);
            assert!(r.iter().all(|v| v.abs() <= 1e-12), "{kind:?}");
            let sym = stiffness(&s).asymmetry();
            assert!(sym <= 1e-13);
        }
    }

    #[test]
    fn energy_of_linear_interpolant() {
        let m = Mesh::<f64>::unit_square(2).unwrap();
        let s = FeSpace::scalar(&m, ElementKind::P1);
        let x = s.interpolate(|p| p[0]);
        assert!((stiffness(&s).bilinear(&x, &x) - 1.0).abs() < 1e-14);
        let stab = pressure_grad_stab(&s);
        let h = m.h();
        assert!((stab.bilinear(&x, &x) - h * h).abs() < 1e-14);
        let diff = stab.add_scaled(1.0, &stiffness(&s), -h * h);
        assert!(diff.to_dense().max_abs() < 1e-14);
        assert!(stab.matvec(&vec![1.0; s.n_dofs()]).iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn mass_totals() {
        let m = Mesh::<f64>::unit_square(3).unwrap();
        for kind in [ElementKind::P0, ElementKind::P1, ElementKind::P1Bubble, ElementKind::P2] {
            let s = FeSpace::vector(&m, kind);
            let mm = mass(&s);
            let ones = s.interpolate_vector(|_| [1.0, 1.0]);
            let total = mm.bilinear(&ones, &ones);
            assert!((total - 2.0).abs() < 1e-13, "{kind:?}");
        }
        let s = FeSpace::scalar(&m, ElementKind::P1);
        let l = lumped_mass(&s);
        assert!(l.iter().all(|&v| v > 0.0));
        assert!((l.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        let total: f64 = mass(&s).values().iter().sum();
        assert!((total - 1.0).abs() < 1e-14);
    }

    #[test]
    fn divergence_of_linear_field() {
        let m = Mesh::<f64>::unit_square(1).unwrap();
        let v = FeSpace::vector(&m, ElementKind::P1);
        let p = FeSpace::scalar(&m, ElementKind::P0);
        let u = v.interpolate_vector(|x| [x[0], 0.0]);
        let bu = divergence(&v, &p).matvec(&u);
        for (k, val) in bu.iter().enumerate() {
            assert!((val + m.geometry(k).area).abs() < 1e-15);
        }
    }

    #[test]
    fn divergence_theorem_for_zero_trace_velocities() {
        let m = Mesh::<f64>::unit_square(4).unwrap();
        for (vk, pk) in [
            (ElementKind::P2, ElementKind::P1),
            (ElementKind::P1Bubble, ElementKind::P1),
            (ElementKind::P2, ElementKind::P0),
            (ElementKind::P1, ElementKind::P1),
            (ElementKind::P1, ElementKind::P0),
        ] {
            let v = FeSpace::vector(&m, vk);
            let p = FeSpace::scalar(&m, pk);
            let b = divergence(&v, &p);
            let ones = p.interpolate(|_| 1.0);
            let btone = b.tr_matvec(&ones);
            for d in v.free_dofs() {
                assert!(btone[d].abs() <= 1e-12, "{vk:?}/{pk:?}");
            }
        }
    }

    #[test]
    fn grad_coupling_examples() {
        let m = Mesh::<f64>::unit_square(3).unwrap();
        let p = FeSpace::scalar(&m, ElementKind::P1);
        let z = FeSpace::vector(&m, ElementKind::P1);
        let g = grad_coupling(&p, &z);
        assert!(g.matvec(&vec![1.0; p.n_dofs()]).iter().all(|v| v.abs() < 1e-14));
        let gx = g.matvec(&p.interpolate(|x| x[0]));
        let expect = load_vector(&z, |_| [1.0, 0.0]);
        for (a, b) in gx.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn boundary_operator_examples() {
        let n = 4;
        let m = Mesh::<f64>::unit_square(n).unwrap();
        let s = FeSpace::scalar(&m, ElementKind::P1);
        let ops = boundary_operators(&s, 1.0).unwrap();
        let ones = vec![1.0; s.n_dofs()];
        let perimeter: f64 = ops.mass_gamma.matvec(&ones).iter().sum();
        assert!((perimeter - 4.0).abs() < 1e-14);
        let pen = ops.penalty.bilinear(&ones, &ones);
        assert!((pen - 4.0 * n as f64).abs() < 1e-12);
        assert!(ops.normal_flux.matvec(&ones).iter().all(|v| v.abs() < 1e-14));
        let tr = &ops.trace_dofs;
        let mg = ops.mass_gamma.select(tr, tr).to_dense();
        assert!(crate::linalg::cholesky(&mg).is_ok());
        assert!(ops.penalty.asymmetry() < 1e-15);
        // ⟨∂x/∂n, 1⟩_Γ = 0 and ⟨∂x/∂n, x⟩_Γ = ∫_{x=1} 1 = 1
        let x = s.interpolate(|p| p[0]);
        assert!(ops.normal_flux.bilinear(&ones, &x).abs() < 1e-14);
        assert!((ops.normal_flux.bilinear(&x, &x) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn dirichlet_elimination() {
        let a = CsrMatrix::from_dense(&DenseMatrix::from_rows(&[[2.0, -1.0], [-1.0, 2.0]]).unwrap());
        let b = CsrMatrix::<f64>::zeros(0, 2);
        let sys = SaddleSystem::new(a.clone(), b.clone(), None, vec![1.0, 1.0], vec![]).unwrap();
        // u1 = 3 leaves 2·u0 = 1 + 3
        let e = sys.clone().apply_dirichlet(&[1], &[3.0]).unwrap();
        assert_eq!(e.a.to_dense(), DenseMatrix::from_rows(&[[2.0, 0.0], [0.0, 1.0]]).unwrap());
        assert_eq!(e.f, vec![4.0, 3.0]);
        let all = sys.clone().apply_dirichlet(&[0, 1], &[0.0, 0.0]).unwrap();
        assert_eq!(all.a.to_dense(), DenseMatrix::identity(2));
        assert_eq!(all.f, vec![0.0, 0.0]);
        let none = sys.clone().apply_dirichlet(&[], &[]).unwrap();
        assert_eq!(none.a, a);
        assert_eq!(none.f, vec![1.0, 1.0]);
    }

    #[test]
    fn block_matrix_layout() {
        let m = Mesh::<f64>::unit_square(2).unwrap();
        let v = FeSpace::vector(&m, ElementKind::P2);
        let p = FeSpace::scalar(&m, ElementKind::P1);
        let a = stiffness(&v);
        let b = divergence(&v, &p);
        let sys = SaddleSystem::new(a, b, None, vec![0.0; v.n_dofs()], vec![0.0; p.n_dofs()])
            .unwrap()
            .with_mean_constraint(mean_vector(&p));
        assert_eq!(sys.dim(), v.n_dofs() + p.n_dofs() + 1);
        assert!(sys.asymmetry() < 1e-15);
    }
}
