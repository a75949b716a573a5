//! Structured triangulations of the unit square.
//!
//! Node `(i, j)` sits at `(i/n, j/n)` with index `j·(n+1) + i`. Every grid
//! cell is split along its lower-left to upper-right diagonal into the
//! counter-clockwise triangles `(a, b, c)` and `(a, c, d)`.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A mesh edge with its (one or two) neighbouring triangles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    /// Endpoints with `nodes[0] < nodes[1]`.
    pub nodes: [usize; 2],
    pub triangles: [usize; 2],
    pub n_triangles: usize,
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.n_triangles == 1
    }
}

/// A boundary edge oriented counter-clockwise with respect to its triangle,
/// so the outward normal is `(dy, −dx)/|E|`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub a: usize,
    pub b: usize,
    pub triangle: usize,
    /// Index into [`Mesh::edges`].
    pub edge: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TriangleGeometry<T> {
    pub area: T,
    pub grad_lambda: [[T; 2]; 3],
    pub diameter: T,
    pub vertices: [[T; 2]; 3],
}

impl<T: Scalar> TriangleGeometry<T> {
    /// Physical coordinates of a barycentric point.
    pub fn map(&self, bary: &[T; 3]) -> [T; 2] {
        let mut x = [T::zero(); 2];
        for (k, v) in self.vertices.iter().enumerate() {
            x[0] += bary[k] * v[0];
            x[1] += bary[k] * v[1];
        }
        x
    }

    pub fn centroid(&self) -> [T; 2] {
        let third = T::one() / T::lit(3.0);
        self.map(&[third, third, third])
    }
}

#[derive(Debug, Clone)]
pub struct Mesh<T> {
    nodes: Vec<[T; 2]>,
    triangles: Vec<[usize; 3]>,
    edges: Vec<Edge>,
    // local edge k of a triangle is opposite local vertex k
    triangle_edges: Vec<[usize; 3]>,
    boundary_edges: Vec<BoundaryEdge>,
    n_cells_per_side: usize,
    h: T,
    h_k: Vec<T>,
}

impl<T: Scalar> Mesh<T> {
    /// Uniform mesh with `n` cells per side.
    pub fn unit_square(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("mesh needs at least one cell per side".into()));
        }
        let np = n + 1;
        let inv_n = T::one() / T::from_count(n);
        let mut nodes = Vec::with_capacity(np * np);
        for j in 0..np {
            for i in 0..np {
                nodes.push([T::from_count(i) * inv_n, T::from_count(j) * inv_n]);
            }
        }
        let mut triangles = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                let a = j * np + i;
                let (b, c, d) = (a + 1, a + np + 1, a + np);
                triangles.push([a, b, c]);
                triangles.push([a, c, d]);
            }
        }
        let mut mesh = Self::from_parts(nodes, triangles)?;
        mesh.n_cells_per_side = n;
        Ok(mesh)
    }

    /// Mesh from explicit nodes and counter-clockwise triangles.
    pub fn from_parts(nodes: Vec<[T; 2]>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        let mut edge_index: HashMap<[usize; 2], usize> = HashMap::new();
        let mut edges: Vec<Edge> = Vec::new();
        let mut triangle_edges = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= nodes.len()) {
                return Err(Error::InvalidParameter(format!("triangle {t} references a missing node")));
            }
            let mut te = [0usize; 3];
            for (k, slot) in te.iter_mut().enumerate() {
                let (u, v) = (tri[(k + 1) % 3], tri[(k + 2) % 3]);
                let key = [u.min(v), u.max(v)];
                let e = *edge_index.entry(key).or_insert_with(|| {
                    edges.push(Edge {
                        nodes: key,
                        triangles: [t, usize::MAX],
                        n_triangles: 0,
                    });
                    edges.len() - 1
                });
                let edge = &mut edges[e];
                if edge.n_triangles >= 2 {
                    return Err(Error::InvalidParameter(format!(
                        "edge {key:?} shared by more than two triangles"
                    )));
                }
                edge.triangles[edge.n_triangles] = t;
                edge.n_triangles += 1;
                *slot = e;
            }
            triangle_edges.push(te);
        }
        let mut boundary_edges = Vec::new();
        for (t, (tri, te)) in triangles.iter().zip(&triangle_edges).enumerate() {
            for k in 0..3 {
                if edges[te[k]].is_boundary() {
                    boundary_edges.push(BoundaryEdge {
                        a: tri[(k + 1) % 3],
                        b: tri[(k + 2) % 3],
                        triangle: t,
                        edge: te[k],
                    });
                }
            }
        }
        let mut mesh = Self {
            nodes,
            triangles,
            edges,
            triangle_edges,
            boundary_edges,
            n_cells_per_side: 0,
            h: T::zero(),
            h_k: Vec::new(),
        };
        let mut h_k = Vec::with_capacity(mesh.triangles.len());
        for t in 0..mesh.triangles.len() {
            let g = mesh.geometry(t);
            if g.area <= T::zero() {
                return Err(Error::InvalidParameter(format!("triangle {t} is not counter-clockwise")));
            }
            h_k.push(g.diameter);
        }
        mesh.h = h_k.iter().copied().fold(T::zero(), T::max);
        mesh.h_k = h_k;
        Ok(mesh)
    }

    pub fn nodes(&self) -> &[[T; 2]] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn triangle_edges(&self, t: usize) -> [usize; 3] {
        self.triangle_edges[t]
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary_edges
    }

    /// Zero for meshes not built by [`Mesh::unit_square`].
    pub fn n_cells_per_side(&self) -> usize {
        self.n_cells_per_side
    }

    /// Largest element diameter.
    pub fn h(&self) -> T {
        self.h
    }

    pub fn h_k(&self) -> &[T] {
        &self.h_k
    }

    /// Sorted list of nodes on boundary edges.
    pub fn boundary_nodes(&self) -> Vec<usize> {
        let mut on = vec![false; self.nodes.len()];
        for e in &self.boundary_edges {
            on[e.a] = true;
            on[e.b] = true;
        }
        (0..self.nodes.len()).filter(|&i| on[i]).collect()
    }

    pub fn geometry(&self, t: usize) -> TriangleGeometry<T> {
        let [i0, i1, i2] = self.triangles[t];
        let (p0, p1, p2) = (self.nodes[i0], self.nodes[i1], self.nodes[i2]);
        let det = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
        let two = T::lit(2.0);
        let grad_lambda = [
            [(p1[1] - p2[1]) / det, (p2[0] - p1[0]) / det],
            [(p2[1] - p0[1]) / det, (p0[0] - p2[0]) / det],
            [(p0[1] - p1[1]) / det, (p1[0] - p0[0]) / det],
        ];
        let len = |a: [T; 2], b: [T; 2]| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
        let diameter = len(p0, p1).max(len(p1, p2)).max(len(p2, p0));
        TriangleGeometry {
            area: det / two,
            grad_lambda,
            diameter,
            vertices: [p0, p1, p2],
        }
    }

    /// Length and outward unit normal of a boundary edge.
    pub fn boundary_edge_frame(&self, e: &BoundaryEdge) -> (T, [T; 2]) {
        let (pa, pb) = (self.nodes[e.a], self.nodes[e.b]);
        let (dx, dy) = (pb[0] - pa[0], pb[1] - pa[1]);
        let len = (dx * dx + dy * dy).sqrt();
        (len, [dy / len, -dx / len])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_cell() {
        let m = Mesh::<f64>::unit_square(1).unwrap();
        assert_eq!((m.n_nodes(), m.n_triangles()), (4, 2));
        for t in 0..2 {
            assert_eq!(m.geometry(t).area, 0.5);
        }
    }

    #[test]
    fn two_cells_per_side() {
        let m = Mesh::<f64>::unit_square(2).unwrap();
        assert_eq!((m.n_nodes(), m.n_triangles()), (9, 8));
        let total: f64 = (0..8).map(|t| m.geometry(t).area).sum();
        assert!((total - 1.0).abs() < 1e-15);
    }

    #[test]
    fn boundary_edge_count() {
        let m = Mesh::<f64>::unit_square(4).unwrap();
        assert_eq!(m.boundary_edges().len(), 16);
        assert_eq!(m.boundary_nodes().len(), 16);
    }

    #[test]
    fn reference_triangle_geometry() {
        let m = Mesh::from_parts(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![[0, 1, 2]]).unwrap();
        let g = m.geometry(0);
        assert_eq!(g.area, 0.5);
        assert_eq!(g.grad_lambda, [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]]);
        let h = 0.125f64;
        let m = Mesh::from_parts(vec![[0.0, 0.0], [h, 0.0], [0.0, h]], vec![[0, 1, 2]]).unwrap();
        assert!((m.geometry(0).area - h * h / 2.0).abs() < 1e-18);
    }

    #[test]
    fn clockwise_triangle_rejected() {
        let r = Mesh::from_parts(vec![[0.0, 0.0], [0.0, 1.0], [1.0, 0.0]], vec![[0, 1, 2]]);
        assert!(r.is_err());
    }

    #[test]
    fn edge_manifold_and_boundary_location() {
        for n in 1..=8 {
            let m = Mesh::<f64>::unit_square(n).unwrap();
            let n_int = m.edges().iter().filter(|e| e.n_triangles == 2).count();
            let n_bnd = m.edges().iter().filter(|e| e.n_triangles == 1).count();
            assert_eq!(n_bnd, 4 * n);
            // Euler: E = V + T − 1 for a disc
            assert_eq!(n_int + n_bnd, m.n_nodes() + m.n_triangles() - 1);
            for e in m.boundary_edges() {
                let (pa, pb) = (m.nodes()[e.a], m.nodes()[e.b]);
                let on_side = |p: [f64; 2]| p[0] == 0.0 || p[0] == 1.0 || p[1] == 0.0 || p[1] == 1.0;
                assert!(on_side(pa) && on_side(pb));
                let mid = [(pa[0] + pb[0]) / 2.0, (pa[1] + pb[1]) / 2.0];
                let (_, nrm) = m.boundary_edge_frame(e);
                let out = [mid[0] + 0.1 * nrm[0], mid[1] + 0.1 * nrm[1]];
                assert!(out[0] < 0.0 || out[0] > 1.0 || out[1] < 0.0 || out[1] > 1.0);
            }
        }
    }

    #[test]
    fn refinement_halves_h_and_cells_are_congruent() {
        for n in [1usize, 2, 3, 5, 8] {
            let coarse = Mesh::<f64>::unit_square(n).unwrap();
            let fine = Mesh::<f64>::unit_square(2 * n).unwrap();
            assert!((fine.h() - coarse.h() / 2.0).abs() < 1e-15);
            assert!((coarse.h() - 2f64.sqrt() / n as f64).abs() < 1e-15);
            let (lo, hi) = coarse
                .h_k()
                .iter()
                .fold((f64::MAX, 0.0f64), |(lo, hi), &h| (lo.min(h), hi.max(h)));
            assert!(hi - lo < 1e-15);
        }
    }

    #[test]
    fn gradients_of_barycentrics_sum_to_zero() {
        let m = Mesh::<f64>::unit_square(3).unwrap();
        for t in 0..m.n_triangles() {
            let g = m.geometry(t).grad_lambda;
            for c in 0..2 {
                assert!((g[0][c] + g[1][c] + g[2][c]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn single_precision_mesh() {
        let m = Mesh::<f32>::unit_square(4).unwrap();
        let total: f32 = (0..m.n_triangles()).map(|t| m.geometry(t).area).sum();
        assert!((total - 1.0).abs() < 1e-6);
    }
}
