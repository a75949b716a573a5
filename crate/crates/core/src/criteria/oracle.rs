//! Independent re-quadrature of the assembled forms.
//!
//! Basis functions are rebuilt from monomials by solving the nodal
//! interpolation conditions at the space's dof coordinates, and integrals
//! use collapsed Gauss–Legendre points on a 4-way subdivision of every
//! triangle. Nothing here goes through the library's shape functions or
//! quadrature tables.

use crate::assembly::{boundary_operators, divergence, grad_coupling, mass, pressure_grad_stab, stiffness};
use crate::fespace::{ElementKind, FeSpace};
use crate::linalg::{CsrMatrix, DenseMatrix};
use crate::mesh::Mesh;

const GL_X: [f64; 4] = [-0.861_136_311_594_052_6, -0.339_981_043_584_856_3, 0.339_981_043_584_856_3, 0.861_136_311_594_052_6];
const GL_W: [f64; 4] = [0.347_854_845_137_453_9, 0.652_145_154_862_546_1, 0.652_145_154_862_546_1, 0.347_854_845_137_453_9];

type P = [f64; 2];

fn lerp(a: P, b: P, s: f64) -> P {
    [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])]
}

fn area(a: P, b: P, c: P) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])).abs()
}

// Collapsed tensor Gauss points on one triangle: exact for degree ≤ 6.
fn duffy(a: P, b: P, c: P, out: &mut Vec<(P, f64)>) {
    let ar = area(a, b, c);
    for (i, &xu) in GL_X.iter().enumerate() {
        let u = 0.5 * (xu + 1.0);
        for (j, &xv) in GL_X.iter().enumerate() {
            let v = 0.5 * (xv + 1.0);
            let (s, t) = (u, v * (1.0 - u));
            let x = [
                a[0] + s * (b[0] - a[0]) + t * (c[0] - a[0]),
                a[1] + s * (b[1] - a[1]) + t * (c[1] - a[1]),
            ];
            out.push((x, GL_W[i] * GL_W[j] * 0.25 * (1.0 - u) * 2.0 * ar));
        }
    }
}

fn subdivided_points(v: [P; 3]) -> Vec<(P, f64)> {
    let m = [lerp(v[1], v[2], 0.5), lerp(v[2], v[0], 0.5), lerp(v[0], v[1], 0.5)];
    let mut out = Vec::with_capacity(64);
    duffy(v[0], m[2], m[1], &mut out);
    duffy(m[2], v[1], m[0], &mut out);
    duffy(m[1], m[0], v[2], &mut out);
    duffy(m[0], m[1], m[2], &mut out);
    out
}

fn solve_small(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs())).unwrap();
        a.swap(k, p);
        b.swap(k, p);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            for j in k..n {
                a[i][j] -= f * a[k][j];
            }
            b[i] -= f * b[k];
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|j| a[k][j] * x[j]).sum();
        x[k] = (b[k] - s) / a[k][k];
    }
    x
}

// Monomials in coordinates relative to `c`, with gradients.
fn monomials(deg: usize, c: P, x: P) -> Vec<(f64, P)> {
    let (dx, dy) = (x[0] - c[0], x[1] - c[1]);
    let mut out = vec![(1.0, [0.0, 0.0]), (dx, [1.0, 0.0]), (dy, [0.0, 1.0])];
    if deg == 2 {
        out.extend([(dx * dx, [2.0 * dx, 0.0]), (dx * dy, [dy, dx]), (dy * dy, [0.0, 2.0 * dy])]);
    }
    out
}

/// Nodal basis of degree 1 or 2 through `nodes`.
struct Lagrange {
    deg: usize,
    center: P,
    coeffs: Vec<Vec<f64>>,
}

impl Lagrange {
    fn new(deg: usize, nodes: &[P]) -> Self {
        let center = [
            nodes.iter().map(|p| p[0]).sum::<f64>() / nodes.len() as f64,
            nodes.iter().map(|p| p[1]).sum::<f64>() / nodes.len() as f64,
        ];
        let vand: Vec<Vec<f64>> = nodes
            .iter()
            .map(|&p| monomials(deg, center, p).into_iter().map(|(v, _)| v).collect())
            .collect();
        let coeffs = (0..nodes.len())
            .map(|i| {
                let rhs = (0..nodes.len()).map(|k| if k == i { 1.0 } else { 0.0 }).collect();
                solve_small(vand.clone(), rhs)
            })
            .collect();
        Self { deg, center, coeffs }
    }

    fn eval(&self, x: P) -> Vec<(f64, P)> {
        let m = monomials(self.deg, self.center, x);
        self.coeffs
            .iter()
            .map(|c| {
                let mut v = 0.0;
                let mut g = [0.0; 2];
                for (ck, (mv, mg)) in c.iter().zip(&m) {
                    v += ck * mv;
                    g[0] += ck * mg[0];
                    g[1] += ck * mg[1];
                }
                (v, g)
            })
            .collect()
    }
}

/// Local basis (values and gradients) of `space` on triangle `t` at `x`.
fn local_basis(space: &FeSpace<'_, f64>, t: usize, x: P) -> Vec<(f64, P)> {
    let mesh = space.mesh();
    let coords = space.dof_coords();
    let dofs = space.scalar_cell_dofs(t);
    match space.kind() {
        ElementKind::P0 => vec![(1.0, [0.0, 0.0])],
        ElementKind::P1 | ElementKind::P2 => {
            let nodes: Vec<P> = dofs.iter().map(|&d| coords[d]).collect();
            let deg = if space.kind() == ElementKind::P1 { 1 } else { 2 };
            Lagrange::new(deg, &nodes).eval(x)
        }
        ElementKind::P1Bubble => {
            let verts: Vec<P> = mesh.triangles()[t].iter().map(|&v| mesh.nodes()[v]).collect();
            let mut out = Lagrange::new(1, &verts).eval(x);
            let (l, g): (Vec<f64>, Vec<P>) = out.iter().copied().unzip();
            let b = 27.0 * l[0] * l[1] * l[2];
            let mut gb = [0.0; 2];
            for c in 0..2 {
                gb[c] = 27.0 * (g[0][c] * l[1] * l[2] + l[0] * g[1][c] * l[2] + l[0] * l[1] * g[2][c]);
            }
            out.push((b, gb));
            out
        }
    }
}

fn tri_vertices(mesh: &Mesh<f64>, t: usize) -> [P; 3] {
    mesh.triangles()[t].map(|v| mesh.nodes()[v])
}

fn rel_diff(assembled: &CsrMatrix<f64>, oracle: &DenseMatrix<f64>) -> f64 {
    let d = assembled.to_dense().sub(oracle).frobenius_norm();
    let s = oracle.frobenius_norm();
    if s > 0.0 {
        d / s
    } else {
        d
    }
}

/// `∫ w_K · form(φ_i, φ_j)` over all triangles; vector spaces get
/// identical diagonal blocks.
fn bilinear(space: &FeSpace<'_, f64>, weight: impl Fn(usize) -> f64, form: impl Fn((f64, P), (f64, P)) -> f64) -> DenseMatrix<f64> {
    let mesh = space.mesh();
    let n = space.n_dofs();
    let ns = space.n_scalar_dofs();
    let mut out = DenseMatrix::zeros(n, n);
    for t in 0..mesh.n_triangles() {
        let dofs = space.scalar_cell_dofs(t);
        for (x, w) in subdivided_points(tri_vertices(mesh, t)) {
            let basis = local_basis(space, t, x);
            for (i, &bi) in basis.iter().enumerate() {
                for (j, &bj) in basis.iter().enumerate() {
                    let v = weight(t) * w * form(bi, bj);
                    for c in 0..space.components() {
                        out[(c * ns + dofs[i], c * ns + dofs[j])] += v;
                    }
                }
            }
        }
    }
    out
}

fn grad_dot(a: (f64, P), b: (f64, P)) -> f64 {
    a.1[0] * b.1[0] + a.1[1] * b.1[1]
}

/// `−∫ ψ_q ∂_c φ_v` with rows indexed by pressure dofs.
fn divergence_oracle(v: &FeSpace<'_, f64>, p: &FeSpace<'_, f64>) -> DenseMatrix<f64> {
    let mesh = v.mesh();
    let ns = v.n_scalar_dofs();
    let mut out = DenseMatrix::zeros(p.n_dofs(), v.n_dofs());
    for t in 0..mesh.n_triangles() {
        let (vd, pd) = (v.scalar_cell_dofs(t), p.scalar_cell_dofs(t));
        for (x, w) in subdivided_points(tri_vertices(mesh, t)) {
            let bv = local_basis(v, t, x);
            let bp = local_basis(p, t, x);
            for (a, &(psi, _)) in bp.iter().enumerate() {
                for (j, &(_, g)) in bv.iter().enumerate() {
                    for c in 0..2 {
                        out[(pd[a], c * ns + vd[j])] -= w * psi * g[c];
                    }
                }
            }
        }
    }
    out
}

/// `∫ φ_z · ∇ψ_p` with rows indexed by the vector space `z`.
fn grad_coupling_oracle(p: &FeSpace<'_, f64>, z: &FeSpace<'_, f64>) -> DenseMatrix<f64> {
    let mesh = p.mesh();
    let ns = z.n_scalar_dofs();
    let mut out = DenseMatrix::zeros(z.n_dofs(), p.n_dofs());
    for t in 0..mesh.n_triangles() {
        let (zd, pd) = (z.scalar_cell_dofs(t), p.scalar_cell_dofs(t));
        for (x, w) in subdivided_points(tri_vertices(mesh, t)) {
            let bz = local_basis(z, t, x);
            let bp = local_basis(p, t, x);
            for (i, &(phi, _)) in bz.iter().enumerate() {
                for (a, &(_, g)) in bp.iter().enumerate() {
                    for c in 0..2 {
                        out[(c * ns + zd[i], pd[a])] += w * phi * g[c];
                    }
                }
            }
        }
    }
    out
}

/// Boundary mass, normal flux `⟨∂φ_j/∂n, φ_i⟩` and `γ Σ (1/|E|)⟨φ_i, φ_j⟩_E`.
fn boundary_oracle(space: &FeSpace<'_, f64>, gamma: f64) -> [DenseMatrix<f64>; 3] {
    let mesh = space.mesh();
    let n = space.n_dofs();
    let mut out = [DenseMatrix::zeros(n, n), DenseMatrix::zeros(n, n), DenseMatrix::zeros(n, n)];
    for e in mesh.boundary_edges() {
        let t = e.triangle;
        let (a, b) = (mesh.nodes()[e.a], mesh.nodes()[e.b]);
        let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
        let third = mesh.triangles()[t].iter().map(|&v| mesh.nodes()[v]).find(|&p| p != a && p != b).unwrap();
        let mut normal = [(b[1] - a[1]) / len, -(b[0] - a[0]) / len];
        let mid = lerp(a, b, 0.5);
        if normal[0] * (third[0] - mid[0]) + normal[1] * (third[1] - mid[1]) > 0.0 {
            normal = [-normal[0], -normal[1]];
        }
        let dofs = space.scalar_cell_dofs(t);
        for (k, &xg) in GL_X.iter().enumerate() {
            let x = lerp(a, b, 0.5 * (xg + 1.0));
            let w = 0.5 * GL_W[k] * len;
            let basis = local_basis(space, t, x);
            for (i, &(vi, _)) in basis.iter().enumerate() {
                for (j, &(vj, gj)) in basis.iter().enumerate() {
                    let (di, dj) = (dofs[i], dofs[j]);
                    out[0][(di, dj)] += w * vi * vj;
                    out[1][(di, dj)] += w * vi * (gj[0] * normal[0] + gj[1] * normal[1]);
                    out[2][(di, dj)] += gamma / len * w * vi * vj;
                }
            }
        }
    }
    out
}

/// Relative Frobenius discrepancy of every assembled form on `mesh`.
pub fn assembly_discrepancies(mesh: &Mesh<f64>) -> crate::Result<Vec<(String, f64)>> {
    use ElementKind::*;
    let mut out = Vec::new();
    let one = |_: usize| 1.0;
    for kind in [P0, P1, P1Bubble, P2] {
        let s = FeSpace::scalar(mesh, kind);
        out.push((format!("mass {}", kind.label()), rel_diff(&mass(&s), &bilinear(&s, one, |a, b| a.0 * b.0))));
        if kind != P0 {
            out.push((format!("stiffness {}", kind.label()), rel_diff(&stiffness(&s), &bilinear(&s, one, grad_dot))));
            let v = FeSpace::vector(mesh, kind);
            out.push((format!("vector stiffness {}", kind.label()), rel_diff(&stiffness(&v), &bilinear(&v, one, grad_dot))));
            out.push((format!("vector mass {}", kind.label()), rel_diff(&mass(&v), &bilinear(&v, one, |a, b| a.0 * b.0))));
        }
    }
    for (vk, pk) in [(P2, P1), (P1Bubble, P1), (P2, P0), (P1, P1), (P1, P0)] {
        let v = FeSpace::vector(mesh, vk);
        let p = FeSpace::scalar(mesh, pk);
        out.push((
            format!("divergence {}/{}", vk.label(), pk.label()),
            rel_diff(&divergence(&v, &p), &divergence_oracle(&v, &p)),
        ));
    }
    let p1 = FeSpace::scalar(mesh, P1);
    let h2: Vec<f64> = mesh.h_k().iter().map(|h| h * h).collect();
    out.push((
        "pressure gradient stabilization".into(),
        rel_diff(&pressure_grad_stab(&p1), &bilinear(&p1, |t| h2[t], grad_dot)),
    ));
    let z = FeSpace::vector(mesh, P1);
    out.push(("gradient coupling".into(), rel_diff(&grad_coupling(&p1, &z), &grad_coupling_oracle(&p1, &z))));
    let gamma = 1.7;
    let ops = boundary_operators(&p1, gamma)?;
    let [mg, nf, pen] = boundary_oracle(&p1, gamma);
    out.push(("boundary mass".into(), rel_diff(&ops.mass_gamma, &mg)));
    out.push(("boundary normal flux".into(), rel_diff(&ops.normal_flux, &nf)));
    out.push(("boundary penalty".into(), rel_diff(&ops.penalty, &pen)));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collapsed_rule_integrates_monomials() {
        let (a, b, c) = ([0.0, 0.0], [1.0, 0.0], [0.0, 1.0]);
        let pts = subdivided_points([a, b, c]);
        // ∫ x^i y^j over the reference triangle = i! j! / (i + j + 2)!
        let fact = |n: u32| (1..=n).map(f64::from).product::<f64>();
        for i in 0..=6u32 {
            for j in 0..=(6 - i) {
                let q: f64 = pts.iter().map(|(x, w)| w * x[0].powi(i as i32) * x[1].powi(j as i32)).sum();
                let exact = fact(i) * fact(j) / fact(i + j + 2);
                assert!((q - exact).abs() < 1e-15, "{i} {j}");
            }
        }
    }

    #[test]
    fn lagrange_basis_is_nodal() {
        let nodes = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.5, 0.5], [0.0, 0.5], [0.5, 0.0]];
        let l = Lagrange::new(2, &nodes);
        for (k, &x) in nodes.iter().enumerate() {
            for (i, (v, _)) in l.eval(x).into_iter().enumerate() {
                assert!((v - if i == k { 1.0 } else { 0.0 }).abs() < 1e-13);
            }
        }
    }
}
