//! Lagrange finite-element spaces on a [`Mesh`].
//!
//! Scalar dof numbering: P0 by triangle; P1 by node; P2 by node, then by
//! edge (`n_nodes + edge`); P1+bubble by node, then by triangle
//! (`n_nodes + t`). Vector spaces are component-major: dof
//! `c·n_scalar + s`.
//!
//! Local P2 dof `3 + k` sits at the midpoint of the edge opposite vertex
//! `k`; local P1+bubble dof 3 is the bubble `27·λ0·λ1·λ2`.

mod quadrature;

pub use quadrature::{edge_gauss, quadrature, QuadratureRule, ASSEMBLY_DEGREE, ERROR_DEGREE, MAX_DEGREE};

use crate::mesh::{Mesh, TriangleGeometry};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ElementKind {
    P0,
    P1,
    P1Bubble,
    P2,
}

impl ElementKind {
    pub fn local_dofs(self) -> usize {
        match self {
            Self::P0 => 1,
            Self::P1 => 3,
            Self::P1Bubble => 4,
            Self::P2 => 6,
        }
    }

    pub fn is_continuous(self) -> bool {
        self != Self::P0
    }

    /// Polynomial degree of the highest basis function.
    pub fn degree(self) -> usize {
        match self {
            Self::P0 => 0,
            Self::P1 => 1,
            Self::P2 => 2,
            Self::P1Bubble => 3,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::P0 => "P0",
            Self::P1 => "P1",
            Self::P1Bubble => "P1+bubble",
            Self::P2 => "P2",
        }
    }
}

/// Basis values at a barycentric point, in local dof order.
pub fn shape_values<T: Scalar>(kind: ElementKind, l: &[T; 3]) -> Vec<T> {
    match kind {
        ElementKind::P0 => vec![T::one()],
        ElementKind::P1 => l.to_vec(),
        ElementKind::P1Bubble => vec![l[0], l[1], l[2], T::lit(27.0) * l[0] * l[1] * l[2]],
        ElementKind::P2 => {
            let (two, four) = (T::lit(2.0), T::lit(4.0));
            let mut v = Vec::with_capacity(6);
            for &li in l {
                v.push(li * (two * li - T::one()));
            }
            for k in 0..3 {
                v.push(four * l[(k + 1) % 3] * l[(k + 2) % 3]);
            }
            v
        }
    }
}

/// Physical basis gradients at a barycentric point, in local dof order.
pub fn shape_gradients<T: Scalar>(
    kind: ElementKind,
    l: &[T; 3],
    geom: &TriangleGeometry<T>,
) -> Vec<[T; 2]> {
    let g = &geom.grad_lambda;
    let comb = |terms: &[(T, usize)]| {
        let mut out = [T::zero(); 2];
        for &(c, i) in terms {
            out[0] += c * g[i][0];
            out[1] += c * g[i][1];
        }
        out
    };
    match kind {
        ElementKind::P0 => vec![[T::zero(); 2]],
        ElementKind::P1 => vec![g[0], g[1], g[2]],
        ElementKind::P1Bubble => {
            let c = T::lit(27.0);
            vec![
                g[0],
                g[1],
                g[2],
                comb(&[(c * l[1] * l[2], 0), (c * l[0] * l[2], 1), (c * l[0] * l[1], 2)]),
            ]
        }
        ElementKind::P2 => {
            let four = T::lit(4.0);
            let mut v = Vec::with_capacity(6);
            for i in 0..3 {
                v.push(comb(&[(four * l[i] - T::one(), i)]));
            }
            for k in 0..3 {
                let (a, b) = ((k + 1) % 3, (k + 2) % 3);
                v.push(comb(&[(four * l[b], a), (four * l[a], b)]));
            }
            v
        }
    }
}

#[derive(Debug, Clone)]
pub struct FeSpace<'m, T> {
    kind: ElementKind,
    components: usize,
    mesh: &'m Mesh<T>,
    n_scalar: usize,
    cell_dofs: Vec<Vec<usize>>,
    boundary_scalar: Vec<usize>,
    dof_coords: Vec<[T; 2]>,
}

impl<'m, T: Scalar> FeSpace<'m, T> {
    pub fn scalar(mesh: &'m Mesh<T>, kind: ElementKind) -> Self {
        Self::new(mesh, kind, 1)
    }

    pub fn vector(mesh: &'m Mesh<T>, kind: ElementKind) -> Self {
        Self::new(mesh, kind, 2)
    }

    pub fn new(mesh: &'m Mesh<T>, kind: ElementKind, components: usize) -> Self {
        assert!(components == 1 || components == 2, "scalar or 2-vector spaces only");
        let n_nodes = mesh.n_nodes();
        let n_tri = mesh.n_triangles();
        let third = T::one() / T::lit(3.0);
        let mut cell_dofs = Vec::with_capacity(n_tri);
        let mut dof_coords: Vec<[T; 2]>;
        let mut boundary_scalar = Vec::new();
        match kind {
            ElementKind::P0 => {
                dof_coords = (0..n_tri).map(|t| mesh.geometry(t).centroid()).collect();
                cell_dofs.extend((0..n_tri).map(|t| vec![t]));
            }
            ElementKind::P1 => {
                dof_coords = mesh.nodes().to_vec();
                cell_dofs.extend(mesh.triangles().iter().map(|t| t.to_vec()));
                boundary_scalar = mesh.boundary_nodes();
            }
            ElementKind::P1Bubble => {
                dof_coords = mesh.nodes().to_vec();
                for (t, tri) in mesh.triangles().iter().enumerate() {
                    let mut d = tri.to_vec();
                    d.push(n_nodes + t);
                    cell_dofs.push(d);
                    dof_coords.push(mesh.geometry(t).map(&[third; 3]));
                }
                boundary_scalar = mesh.boundary_nodes();
            }
            ElementKind::P2 => {
                dof_coords = mesh.nodes().to_vec();
                let half = T::lit(0.5);
                for e in mesh.edges() {
                    let (a, b) = (mesh.nodes()[e.nodes[0]], mesh.nodes()[e.nodes[1]]);
                    dof_coords.push([(a[0] + b[0]) * half, (a[1] + b[1]) * half]);
                }
                for (t, tri) in mesh.triangles().iter().enumerate() {
                    let mut d = tri.to_vec();
                    d.extend(mesh.triangle_edges(t).iter().map(|&e| n_nodes + e));
                    cell_dofs.push(d);
                }
                boundary_scalar = mesh.boundary_nodes();
                boundary_scalar.extend(
                    mesh.edges()
                        .iter()
                        .enumerate()
                        .filter(|(_, e)| e.is_boundary())
                        .map(|(i, _)| n_nodes + i),
                );
                boundary_scalar.sort_unstable();
            }
        }
        Self {
            kind,
            components,
            mesh,
            n_scalar: dof_coords.len(),
            cell_dofs,
            boundary_scalar,
            dof_coords,
        }
    }

    pub fn kind(&self) -> ElementKind {
        self.kind
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn mesh(&self) -> &'m Mesh<T> {
        self.mesh
    }

    pub fn n_scalar_dofs(&self) -> usize {
        self.n_scalar
    }

    pub fn n_dofs(&self) -> usize {
        self.n_scalar * self.components
    }

    /// Scalar dofs of triangle `t` in local order.
    pub fn scalar_cell_dofs(&self, t: usize) -> &[usize] {
        &self.cell_dofs[t]
    }

    /// All dofs of triangle `t`, component-major.
    pub fn cell_dofs(&self, t: usize) -> Vec<usize> {
        let mut d = Vec::with_capacity(self.cell_dofs[t].len() * self.components);
        for c in 0..self.components {
            d.extend(self.cell_dofs[t].iter().map(|&s| c * self.n_scalar + s));
        }
        d
    }

    /// Sorted dofs (all components) whose nodes lie on the boundary.
    pub fn boundary_dofs(&self) -> Vec<usize> {
        let mut d = Vec::with_capacity(self.boundary_scalar.len() * self.components);
        for c in 0..self.components {
            d.extend(self.boundary_scalar.iter().map(|&s| c * self.n_scalar + s));
        }
        d
    }

    /// Complement of [`FeSpace::boundary_dofs`].
    pub fn free_dofs(&self) -> Vec<usize> {
        let mut on = vec![false; self.n_dofs()];
        for d in self.boundary_dofs() {
            on[d] = true;
        }
        (0..self.n_dofs()).filter(|&d| !on[d]).collect()
    }

    /// Lagrange node of each scalar dof (barycenter for bubbles, centroid for P0).
    pub fn dof_coords(&self) -> &[[T; 2]] {
        &self.dof_coords
    }

    /// Nodal interpolant of a scalar function. For P1+bubble the bubble
    /// coefficient makes the interpolant exact at the barycenter.
    pub fn interpolate(&self, f: impl Fn([T; 2]) -> T) -> Vec<T> {
        assert_eq!(self.components, 1, "use interpolate_vector for vector spaces");
        self.interpolate_component(&f)
    }

    pub fn interpolate_vector(&self, f: impl Fn([T; 2]) -> [T; 2]) -> Vec<T> {
        assert_eq!(self.components, 2, "use interpolate for scalar spaces");
        let mut out = self.interpolate_component(&|x| f(x)[0]);
        out.extend(self.interpolate_component(&|x| f(x)[1]));
        out
    }

    fn interpolate_component(&self, f: &dyn Fn([T; 2]) -> T) -> Vec<T> {
        let mut v: Vec<T> = self.dof_coords.iter().map(|&x| f(x)).collect();
        if self.kind == ElementKind::P1Bubble {
            let third = T::one() / T::lit(3.0);
            let n_nodes = self.mesh.n_nodes();
            for (t, tri) in self.mesh.triangles().iter().enumerate() {
                let linear = tri.iter().map(|&i| v[i]).sum::<T>() * third;
                v[n_nodes + t] -= linear;
            }
        }
        v
    }

    /// Value of component `c` of a finite-element function on triangle `t`.
    pub fn eval(&self, coeffs: &[T], c: usize, t: usize, bary: &[T; 3]) -> T {
        let off = c * self.n_scalar;
        shape_values(self.kind, bary)
            .iter()
            .zip(&self.cell_dofs[t])
            .map(|(&phi, &d)| phi * coeffs[off + d])
            .sum()
    }

    /// Gradient of component `c` on triangle `t`.
    pub fn eval_grad(
        &self,
        coeffs: &[T],
        c: usize,
        t: usize,
        bary: &[T; 3],
        geom: &TriangleGeometry<T>,
    ) -> [T; 2] {
        let off = c * self.n_scalar;
        let mut g = [T::zero(); 2];
        for (dphi, &d) in shape_gradients(self.kind, bary, geom).iter().zip(&self.cell_dofs[t]) {
            g[0] += dphi[0] * coeffs[off + d];
            g[1] += dphi[1] * coeffs[off + d];
        }
        g
    }
}
