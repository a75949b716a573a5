//! Weakly imposed Dirichlet data for `−Δu + u = f` with P1 elements: a
//! boundary Lagrange multiplier, its Barbosa–Hughes stabilization, and
//! Nitsche's method.

use std::f64::consts::PI;
use std::fmt;

use crate::assembly::{boundary_operators, load_scalar, mass, solve_linear, stiffness};
use crate::error::{Error, Result};
use crate::fespace::{edge_gauss, quadrature, ElementKind, FeSpace, ERROR_DEGREE};
use crate::linalg::{
    block_matrix, generalized_max_eigenvalue, norm2, BandedLu, CsrMatrix, DenseMatrix, Triplets,
};
use crate::mesh::Mesh;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeakBcMethod {
    Multiplier,
    BarbosaHughes(f64),
    Nitsche(f64),
}

impl WeakBcMethod {
    pub const NAMES: [&'static str; 3] = ["multiplier", "bh", "nitsche"];

    pub fn name(self) -> &'static str {
        match self {
            Self::Multiplier => "multiplier",
            Self::BarbosaHughes(_) => "bh",
            Self::Nitsche(_) => "nitsche",
        }
    }

    /// Parses a method name; `param` is α for `bh` and γ for `nitsche`.
    pub fn parse(name: &str, param: f64) -> Result<Self> {
        let m = match name {
            "multiplier" => Self::Multiplier,
            "bh" => Self::BarbosaHughes(param),
            "nitsche" => Self::Nitsche(param),
            _ => {
                return Err(Error::InvalidParameter(format!(
                    "unknown weak boundary method '{name}' (expected one of {})",
                    Self::NAMES.join(", ")
                )))
            }
        };
        m.validate()?;
        Ok(m)
    }

    fn validate(self) -> Result<()> {
        match self {
            Self::BarbosaHughes(p) | Self::Nitsche(p) if !(p > 0.0 && p.is_finite()) => Err(Error::InvalidParameter(
                format!("{} parameter must be positive, got {p}", self.name()),
            )),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for WeakBcMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Multiplier => f.write_str("multiplier"),
            Self::BarbosaHughes(a) => write!(f, "bh(alpha={a})"),
            Self::Nitsche(g) => write!(f, "nitsche(gamma={g})"),
        }
    }
}

/// Space of the boundary multiplier.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceSpace {
    /// Continuous piecewise linears on the boundary (traces of `V_h`).
    P1,
    /// Constants per boundary edge.
    P0,
}

/// Form of the Nitsche penalty.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NitschePenalty {
    /// `γ Σ_E (1/h_E) ⟨u, v⟩_E`.
    Full,
    /// `γ Σ_E (1/h_E) ⟨Π₀u, Π₀v⟩_E` with `Π₀` the edge mean; this is what
    /// eliminating P0 multipliers from the stabilized system produces.
    Projected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WeakBcOptions {
    pub trace: TraceSpace,
    pub penalty: NitschePenalty,
}

impl Default for WeakBcOptions {
    fn default() -> Self {
        Self {
            trace: TraceSpace::P1,
            penalty: NitschePenalty::Full,
        }
    }
}

#[derive(Debug, Clone)]
pub struct WeakBcSystem {
    pub matrix: CsrMatrix<f64>,
    pub rhs: Vec<f64>,
    pub n_u: usize,
    pub n_lambda: usize,
    pub method: WeakBcMethod,
}

#[derive(Debug, Clone)]
pub struct WeakBcSolution {
    pub u: Vec<f64>,
    /// Multiplier coefficients (boundary nodes for P1 traces, boundary edges
    /// for P0), absent for Nitsche.
    pub lambda: Option<Vec<f64>>,
    pub residual_norm: f64,
}

impl WeakBcSystem {
    pub fn solve(&self) -> Result<WeakBcSolution> {
        let x = solve_linear(&self.matrix, &self.rhs)?;
        let kx = self.matrix.matvec(&x);
        let res = norm2(&kx.iter().zip(&self.rhs).map(|(a, b)| a - b).collect::<Vec<_>>());
        let rn = norm2(&self.rhs);
        let residual_norm = if rn > 0.0 { res / rn } else { res };
        let (u, lam) = x.split_at(self.n_u);
        Ok(WeakBcSolution {
            u: u.to_vec(),
            lambda: (self.n_lambda > 0).then(|| lam.to_vec()),
            residual_norm,
        })
    }
}

// Per boundary edge: endpoints, the normal derivative of each basis
// function of the adjacent triangle, and the edge length.
struct EdgeData {
    ends: [usize; 2],
    tri_nodes: [usize; 3],
    dn: [f64; 3],
    len: f64,
    mid: usize,
    a: [f64; 2],
    b: [f64; 2],
}

fn edge_data(mesh: &Mesh<f64>) -> Vec<EdgeData> {
    mesh.boundary_edges()
        .iter()
        .map(|e| {
            let (len, normal) = mesh.boundary_edge_frame(e);
            let geom = mesh.geometry(e.triangle);
            let dn = geom.grad_lambda.map(|g| g[0] * normal[0] + g[1] * normal[1]);
            EdgeData {
                ends: [e.a, e.b],
                tri_nodes: mesh.triangles()[e.triangle],
                dn,
                len,
                mid: e.edge,
                a: mesh.nodes()[e.a],
                b: mesh.nodes()[e.b],
            }
        })
        .collect()
}

// Gauss points on an edge: (position, weight × length, endpoint shape values).
fn edge_points(e: &EdgeData) -> Vec<([f64; 2], f64, [f64; 2])> {
    edge_gauss::<f64>()
        .into_iter()
        .map(|(s, w)| {
            let x = [e.a[0] + s * (e.b[0] - e.a[0]), e.a[1] + s * (e.b[1] - e.a[1])];
            (x, w * e.len, [1.0 - s, s])
        })
        .collect()
}

/// Assembles the linear system of a weak boundary method for P1 elements.
pub fn build(
    method: WeakBcMethod,
    mesh: &Mesh<f64>,
    f: impl Fn([f64; 2]) -> f64,
    d: impl Fn([f64; 2]) -> f64,
    options: WeakBcOptions,
) -> Result<WeakBcSystem> {
    method.validate()?;
    let space = FeSpace::scalar(mesh, ElementKind::P1);
    let n_u = space.n_dofs();
    let a = stiffness(&space).add_scaled(1.0, &mass(&space), 1.0);
    let load = load_scalar(&space, f);
    let edges = edge_data(mesh);
    match method {
        WeakBcMethod::Nitsche(gamma) => nitsche(&space, a, load, &edges, gamma, d, options.penalty),
        WeakBcMethod::Multiplier => multiplier(mesh, a, load, &edges, 0.0, d, options.trace),
        WeakBcMethod::BarbosaHughes(alpha) => multiplier(mesh, a, load, &edges, alpha, d, options.trace),
    }
    .map(|(matrix, rhs, n_lambda)| WeakBcSystem {
        matrix,
        rhs,
        n_u,
        n_lambda,
        method,
    })
}

type Assembled = (CsrMatrix<f64>, Vec<f64>, usize);

fn nitsche(
    space: &FeSpace<'_, f64>,
    a: CsrMatrix<f64>,
    mut load: Vec<f64>,
    edges: &[EdgeData],
    gamma: f64,
    d: impl Fn([f64; 2]) -> f64,
    penalty: NitschePenalty,
) -> Result<Assembled> {
    let n = space.n_dofs();
    let ops = boundary_operators(space, gamma)?;
    let pen = match penalty {
        NitschePenalty::Full => ops.penalty,
        NitschePenalty::Projected => {
            let mut t = Triplets::new(n, n);
            // (1/h_E) |E| (1/2)(1/2)
            for e in edges {
                for &i in &e.ends {
                    for &j in &e.ends {
                        t.push(i, j, gamma * 0.25);
                    }
                }
            }
            t.into_csr()
        }
    };
    let q = &ops.normal_flux;
    let matrix = a
        .add_scaled(1.0, q, -1.0)
        .add_scaled(1.0, &q.transpose(), -1.0)
        .add_scaled(1.0, &pen, 1.0);
    for e in edges {
        let pts = edge_points(e);
        let int_d: f64 = pts.iter().map(|&(x, w, _)| w * d(x)).sum();
        for (k, &node) in e.tri_nodes.iter().enumerate() {
            load[node] -= e.dn[k] * int_d;
        }
        match penalty {
            NitschePenalty::Full => {
                for &(x, w, phi) in &pts {
                    let dx = d(x);
                    for i in 0..2 {
                        load[e.ends[i]] += gamma / e.len * w * dx * phi[i];
                    }
                }
            }
            NitschePenalty::Projected => {
                for &i in &e.ends {
                    load[i] += gamma / e.len * 0.5 * int_d;
                }
            }
        }
    }
    Ok((matrix, load, 0))
}

// Multiplier system, stabilized when alpha > 0:
// [[A − α Σ h_E D_E, (T − α h N)ᵀ], [T − α h N, −α h M_Λ]].
fn multiplier(
    mesh: &Mesh<f64>,
    a: CsrMatrix<f64>,
    load: Vec<f64>,
    edges: &[EdgeData],
    alpha: f64,
    d: impl Fn([f64; 2]) -> f64,
    trace: TraceSpace,
) -> Result<Assembled> {
    let n_u = a.rows();
    let (n_l, map) = trace_numbering(mesh, edges, trace);
    let mut tt = Triplets::new(n_l, n_u);
    let mut tl = Triplets::new(n_l, n_l);
    let mut ta = Triplets::new(n_u, n_u);
    let mut g = vec![0.0; n_l];
    for e in edges {
        let h = e.len;
        for (x, w, phi) in edge_points(e) {
            let mus = trace_values(trace, &map, e, phi);
            let dx = d(x);
            for &(mi, mv) in &mus {
                g[mi] += w * dx * mv;
                for i in 0..2 {
                    tt.push(mi, e.ends[i], w * mv * phi[i]);
                }
                for k in 0..3 {
                    tt.push(mi, e.tri_nodes[k], -alpha * h * w * mv * e.dn[k]);
                }
                for &(mj, mw) in &mus {
                    tl.push(mi, mj, -alpha * h * w * mv * mw);
                }
            }
        }
        // ∂u/∂n is constant on the edge
        for i in 0..3 {
            for j in 0..3 {
                ta.push(e.tri_nodes[i], e.tri_nodes[j], -alpha * h * e.len * e.dn[i] * e.dn[j]);
            }
        }
    }
    let t = tt.into_csr();
    let t_tr = t.transpose();
    let a = a.add_scaled(1.0, &ta.into_csr(), 1.0);
    let ml = tl.into_csr();
    let matrix = block_matrix(
        &[n_u, n_l],
        &[n_u, n_l],
        &[(0, 0, &a, 1.0), (0, 1, &t_tr, 1.0), (1, 0, &t, 1.0), (1, 1, &ml, 1.0)],
    );
    Ok((matrix, [load, g].concat(), n_l))
}

// Multiplier dof of each boundary node (P1) or mesh edge (P0).
fn trace_numbering(mesh: &Mesh<f64>, edges: &[EdgeData], trace: TraceSpace) -> (usize, Vec<usize>) {
    match trace {
        TraceSpace::P1 => {
            let nodes = mesh.boundary_nodes();
            let mut map = vec![usize::MAX; mesh.n_nodes()];
            for (k, &v) in nodes.iter().enumerate() {
                map[v] = k;
            }
            (nodes.len(), map)
        }
        TraceSpace::P0 => {
            let mut map = vec![usize::MAX; mesh.edges().len()];
            for (k, e) in edges.iter().enumerate() {
                map[e.mid] = k;
            }
            (edges.len(), map)
        }
    }
}

fn trace_values(trace: TraceSpace, map: &[usize], e: &EdgeData, phi: [f64; 2]) -> Vec<(usize, f64)> {
    match trace {
        TraceSpace::P1 => vec![(map[e.ends[0]], phi[0]), (map[e.ends[1]], phi[1])],
        TraceSpace::P0 => vec![(map[e.mid], 1.0)],
    }
}

/// Coordinates of the multiplier dofs: boundary nodes for P1 traces, edge
/// midpoints for P0.
pub fn trace_dof_positions(mesh: &Mesh<f64>, trace: TraceSpace) -> Vec<[f64; 2]> {
    let edges = edge_data(mesh);
    let (n_l, map) = trace_numbering(mesh, &edges, trace);
    let mut out = vec![[0.0; 2]; n_l];
    match trace {
        TraceSpace::P1 => {
            for v in mesh.boundary_nodes() {
                out[map[v]] = mesh.nodes()[v];
            }
        }
        TraceSpace::P0 => {
            for e in &edges {
                out[map[e.mid]] = [(e.a[0] + e.b[0]) / 2.0, (e.a[1] + e.b[1]) / 2.0];
            }
        }
    }
    out
}

/// `C_i` of `h^{1/2} ‖∂v/∂n‖_Γ ≤ C_i ‖∇v‖_Ω` over the P1 space, with `h` the
/// mesh size.
pub fn inverse_constant(mesh: &Mesh<f64>) -> Result<f64> {
    inverse_constant_weighted(mesh, mesh.h())
}

/// Same as [`inverse_constant`] with an explicit weight in place of `h`.
pub fn inverse_constant_weighted(mesh: &Mesh<f64>, weight: f64) -> Result<f64> {
    let space = FeSpace::scalar(mesh, ElementKind::P1);
    let n = space.n_dofs();
    let edges = edge_data(mesh);
    let mut support: Vec<usize> = edges.iter().flat_map(|e| e.tri_nodes).collect();
    support.sort_unstable();
    support.dedup();
    let mut local = vec![usize::MAX; n];
    for (k, &v) in support.iter().enumerate() {
        local[v] = k;
    }
    let mut t = Triplets::new(support.len(), support.len());
    for e in &edges {
        for i in 0..3 {
            for j in 0..3 {
                t.push(local[e.tri_nodes[i]], local[e.tri_nodes[j]], weight * e.len * e.dn[i] * e.dn[j]);
            }
        }
    }
    // constants are in the kernel of both forms; the mass shift keeps the
    // denominator definite without moving the other eigenvalues noticeably
    let denom = stiffness(&space).add_scaled(1.0, &mass(&space), 1e-12);
    let lmax = generalized_max_eigenvalue(&t.into_csr().to_dense(), &schur_support(&denom, &support)?)?;
    Ok(lmax.max(0.0).sqrt())
}

// Schur complement of `k` onto `keep`. The numerator vanishes outside the
// nodes of boundary triangles, so the Rayleigh quotient maximum is attained
// with the remaining values minimizing the energy.
fn schur_support(k: &CsrMatrix<f64>, keep: &[usize]) -> Result<DenseMatrix<f64>> {
    let mut in_keep = vec![false; k.rows()];
    for &i in keep {
        in_keep[i] = true;
    }
    let rest: Vec<usize> = (0..k.rows()).filter(|&i| !in_keep[i]).collect();
    let mut schur = k.select(keep, keep).to_dense();
    if rest.is_empty() {
        return Ok(schur);
    }
    let lu = BandedLu::new(&k.select(&rest, &rest))?;
    let coupling = k.select(&rest, keep).to_dense();
    for j in 0..keep.len() {
        let col: Vec<f64> = (0..rest.len()).map(|i| coupling[(i, j)]).collect();
        let x = lu.solve(&col);
        for i in 0..keep.len() {
            let s: f64 = (0..rest.len()).map(|r| coupling[(r, i)] * x[r]).sum();
            schur[(i, j)] -= s;
        }
    }
    Ok(schur)
}

/// How the stability thresholds depend on `C_i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ThresholdRule {
    /// `γ = 4 C_i²`, `α = 0.5 / C_i²`, consistent with the penalty argument.
    #[default]
    Squared,
    /// `γ = 4 C_i`, `α = 0.5 / C_i`.
    Linear,
}

impl std::str::FromStr for ThresholdRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "squared" => Ok(Self::Squared),
            "linear" => Ok(Self::Linear),
            _ => Err(Error::InvalidParameter(format!("unknown threshold rule '{s}' (squared, linear)"))),
        }
    }
}

/// `(γ, α) = (4 C_i², 0.5 / C_i²)`.
pub fn default_parameters(mesh: &Mesh<f64>) -> Result<(f64, f64)> {
    parameters(mesh, ThresholdRule::Squared)
}

pub fn parameters(mesh: &Mesh<f64>, rule: ThresholdRule) -> Result<(f64, f64)> {
    let c = inverse_constant(mesh)?;
    let k = match rule {
        ThresholdRule::Squared => c * c,
        ThresholdRule::Linear => c,
    };
    Ok((4.0 * k, 0.5 / k))
}

/// Manufactured solution `u = cos(πx) cos(πy)` with `f = (2π² + 1) u`.
#[derive(Debug, Clone, Copy, Default)]
pub struct WeakBcManufactured;

impl WeakBcManufactured {
    pub fn u(&self, x: [f64; 2]) -> f64 {
        (PI * x[0]).cos() * (PI * x[1]).cos()
    }

    pub fn grad(&self, x: [f64; 2]) -> [f64; 2] {
        let (sx, cx) = (PI * x[0]).sin_cos();
        let (sy, cy) = (PI * x[1]).sin_cos();
        [-PI * sx * cy, -PI * cx * sy]
    }

    pub fn f(&self, x: [f64; 2]) -> f64 {
        (2.0 * PI * PI + 1.0) * self.u(x)
    }

    /// Boundary data: the trace of `u`.
    pub fn d(&self, x: [f64; 2]) -> f64 {
        self.u(x)
    }
}

/// `(‖u − u_h‖_L², |u − u_h|_H¹)` for a P1 coefficient vector.
pub fn errors(
    mesh: &Mesh<f64>,
    u: &[f64],
    exact: impl Fn([f64; 2]) -> f64,
    exact_grad: impl Fn([f64; 2]) -> [f64; 2],
) -> (f64, f64) {
    let space = FeSpace::scalar(mesh, ElementKind::P1);
    let rule = quadrature::<f64>(ERROR_DEGREE).expect("tabulated");
    let (mut l2, mut h1) = (0.0, 0.0);
    for t in 0..mesh.n_triangles() {
        let geom = mesh.geometry(t);
        for (l, w) in rule.iter() {
            let x = geom.map(l);
            let jw = w * geom.area;
            let e = exact(x) - space.eval(u, 0, t, l);
            let g = space.eval_grad(u, 0, t, l, &geom);
            let ge = exact_grad(x);
            l2 += jw * e * e;
            h1 += jw * ((ge[0] - g[0]).powi(2) + (ge[1] - g[1]).powi(2));
        }
    }
    (l2.sqrt(), h1.sqrt())
}

/// Full `H¹` norm of a P1 function.
pub fn h1_norm(mesh: &Mesh<f64>, u: &[f64]) -> f64 {
    let space = FeSpace::scalar(mesh, ElementKind::P1);
    let a = stiffness(&space).add_scaled(1.0, &mass(&space), 1.0);
    a.bilinear(u, u).max(0.0).sqrt()
}

/// Result of comparing the stabilized multiplier method (P0 traces) with
/// Nitsche at `γ = 1/α`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Equivalence {
    /// `‖u_BH − u_N‖_H¹ / ‖u_BH‖_H¹` with the projected Nitsche penalty.
    pub projected: f64,
    /// Same with the full penalty `⟨u, v⟩_E`; not expected to vanish.
    pub full: f64,
}

pub fn equivalence_check(
    mesh: &Mesh<f64>,
    alpha: f64,
    f: impl Fn([f64; 2]) -> f64 + Copy,
    d: impl Fn([f64; 2]) -> f64 + Copy,
) -> Result<Equivalence> {
    let bh = build(
        WeakBcMethod::BarbosaHughes(alpha),
        mesh,
        f,
        d,
        WeakBcOptions {
            trace: TraceSpace::P0,
            penalty: NitschePenalty::Projected,
        },
    )?
    .solve()?;
    let scale = h1_norm(mesh, &bh.u);
    let mut out = [0.0; 2];
    for (k, penalty) in [NitschePenalty::Projected, NitschePenalty::Full].into_iter().enumerate() {
        let opts = WeakBcOptions {
            trace: TraceSpace::P0,
            penalty,
        };
        let nit = build(WeakBcMethod::Nitsche(1.0 / alpha), mesh, f, d, opts)?.solve()?;
        let diff: Vec<f64> = bh.u.iter().zip(&nit.u).map(|(a, b)| a - b).collect();
        let dn = h1_norm(mesh, &diff);
        out[k] = if scale > 0.0 { dn / scale } else { dn };
    }
    Ok(Equivalence {
        projected: out[0],
        full: out[1],
    })
}

/// Mean jump of the multiplier between neighbouring trace dofs relative to
/// its largest magnitude. Reported to surface oscillations; P1 traces only.
pub fn lambda_roughness(mesh: &Mesh<f64>, lambda: &[f64]) -> f64 {
    let edges = edge_data(mesh);
    let (_, map) = trace_numbering(mesh, &edges, TraceSpace::P1);
    let peak = lambda.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if peak == 0.0 || edges.is_empty() {
        return 0.0;
    }
    let total: f64 = edges
        .iter()
        .map(|e| (lambda[map[e.ends[0]]] - lambda[map[e.ends[1]]]).abs())
        .sum();
    total / edges.len() as f64 / peak
}
