//! Stokes discretizations on the unit square with zero velocity on the
//! boundary and mean-zero pressure.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::assembly::{
    divergence, grad_coupling, grad_load, load_vector, lumped_mass, mean_vector, pressure_grad_stab,
    stiffness, weighted_stiffness, SaddleSystem,
};
use crate::error::{Error, Result};
use crate::fespace::{quadrature, ElementKind, FeSpace, ERROR_DEGREE};
use crate::linalg::{block_matrix, lu_solve, BandedLu, CsrMatrix};
use crate::mesh::Mesh;

/// Stabilization parameter used when none is given.
pub const DEFAULT_EPS: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StokesMethod {
    /// P1/P1 with no stabilization.
    P1P1Plain,
    /// P1/P1 with the projected pressure-gradient loss put back,
    /// `C = Σ h_K² S_K − h² Gᵀ M_L⁻¹ G`.
    P1P1Loss,
    /// P1/P1 with `C = ε Σ h_K² S_K`.
    BrezziPitkaranta(f64),
    /// Galerkin least squares on P1/P1.
    GalerkinLS(f64),
    /// Douglas–Wang on P1/P1 (non-symmetric).
    DouglasWang(f64),
    TaylorHood,
    Mini,
    P2P0,
}

impl StokesMethod {
    pub const NAMES: [&'static str; 8] = ["p1p1-plain", "p1p1-loss", "bp", "gls", "dw", "th", "mini", "p2p0"];

    /// Velocity and pressure elements.
    pub fn elements(self) -> (ElementKind, ElementKind) {
        match self {
            Self::TaylorHood => (ElementKind::P2, ElementKind::P1),
            Self::Mini => (ElementKind::P1Bubble, ElementKind::P1),
            Self::P2P0 => (ElementKind::P2, ElementKind::P0),
            _ => (ElementKind::P1, ElementKind::P1),
        }
    }

    pub fn eps(self) -> Option<f64> {
        match self {
            Self::BrezziPitkaranta(e) | Self::GalerkinLS(e) | Self::DouglasWang(e) => Some(e),
            _ => None,
        }
    }

    pub fn is_symmetric(self) -> bool {
        !matches!(self, Self::DouglasWang(_))
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::P1P1Plain => "p1p1-plain",
            Self::P1P1Loss => "p1p1-loss",
            Self::BrezziPitkaranta(_) => "bp",
            Self::GalerkinLS(_) => "gls",
            Self::DouglasWang(_) => "dw",
            Self::TaylorHood => "th",
            Self::Mini => "mini",
            Self::P2P0 => "p2p0",
        }
    }

    /// Parses a method name, using `eps` for the stabilized variants.
    pub fn parse(name: &str, eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::InvalidParameter(format!("eps must be positive, got {eps}")));
        }
        Ok(match name {
            "p1p1-plain" => Self::P1P1Plain,
            "p1p1-loss" => Self::P1P1Loss,
            "bp" => Self::BrezziPitkaranta(eps),
            "gls" => Self::GalerkinLS(eps),
            "dw" => Self::DouglasWang(eps),
            "th" => Self::TaylorHood,
            "mini" => Self::Mini,
            "p2p0" => Self::P2P0,
            other => {
                return Err(Error::InvalidParameter(format!(
                    "unknown method {other:?}; expected one of {}",
                    Self::NAMES.join(", ")
                )))
            }
        })
    }
}

impl fmt::Display for StokesMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.eps() {
            Some(e) => write!(f, "{}(eps={e})", self.name()),
            None => f.write_str(self.name()),
        }
    }
}

impl FromStr for StokesMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s, DEFAULT_EPS)
    }
}

/// Smooth exact solution: `u = curl ψ` with `ψ = sin²(πx) sin²(πy)/π`,
/// `p = sin(2πx) sin(2πy)`, and `f = −Δu + ∇p`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Manufactured;

impl Manufactured {
    pub fn velocity(&self, x: [f64; 2]) -> [f64; 2] {
        let (sx, sy) = ((PI * x[0]).sin(), (PI * x[1]).sin());
        [sx * sx * (2.0 * PI * x[1]).sin(), -(2.0 * PI * x[0]).sin() * sy * sy]
    }

    /// `[[∂u₁/∂x, ∂u₁/∂y], [∂u₂/∂x, ∂u₂/∂y]]`
    pub fn velocity_gradient(&self, x: [f64; 2]) -> [[f64; 2]; 2] {
        let (sx, sy) = ((PI * x[0]).sin(), (PI * x[1]).sin());
        let (s2x, s2y) = ((2.0 * PI * x[0]).sin(), (2.0 * PI * x[1]).sin());
        let (c2x, c2y) = ((2.0 * PI * x[0]).cos(), (2.0 * PI * x[1]).cos());
        [
            [PI * s2x * s2y, 2.0 * PI * sx * sx * c2y],
            [-2.0 * PI * c2x * sy * sy, -PI * s2x * s2y],
        ]
    }

    pub fn pressure(&self, x: [f64; 2]) -> f64 {
        (2.0 * PI * x[0]).sin() * (2.0 * PI * x[1]).sin()
    }

    pub fn pressure_gradient(&self, x: [f64; 2]) -> [f64; 2] {
        let (s2x, s2y) = ((2.0 * PI * x[0]).sin(), (2.0 * PI * x[1]).sin());
        let (c2x, c2y) = ((2.0 * PI * x[0]).cos(), (2.0 * PI * x[1]).cos());
        [2.0 * PI * c2x * s2y, 2.0 * PI * s2x * c2y]
    }

    pub fn force(&self, x: [f64; 2]) -> [f64; 2] {
        let (s2x, s2y) = ((2.0 * PI * x[0]).sin(), (2.0 * PI * x[1]).sin());
        let (c2x, c2y) = ((2.0 * PI * x[0]).cos(), (2.0 * PI * x[1]).cos());
        let two_pi2 = 2.0 * PI * PI;
        [
            -two_pi2 * s2y * (2.0 * c2x - 1.0) + 2.0 * PI * c2x * s2y,
            two_pi2 * s2x * (2.0 * c2y - 1.0) + 2.0 * PI * s2x * c2y,
        ]
    }
}

/// An assembled Stokes problem with its spaces.
pub struct StokesProblem<'m> {
    pub method: StokesMethod,
    pub velocity: FeSpace<'m, f64>,
    pub pressure: FeSpace<'m, f64>,
    pub system: SaddleSystem<f64>,
    // G and lumped z-mass for the projected gradient of P1P1Loss
    projection: Option<(CsrMatrix<f64>, Vec<f64>)>,
}

#[derive(Debug, Clone)]
pub struct StokesSolution {
    pub u: Vec<f64>,
    /// Mean-zero pressure.
    pub p: Vec<f64>,
    /// Lumped projection of `∇p` (P1P1Loss only).
    pub z: Option<Vec<f64>>,
    pub residual_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StokesErrors {
    pub err_u_l2: f64,
    /// `|u − u_h|_{H¹}` seminorm.
    pub err_u_h1: f64,
    pub err_p_l2: f64,
}

/// Assembles `method` on `mesh` with body force `f`.
pub fn build<'m>(method: StokesMethod, mesh: &'m Mesh<f64>, f: &dyn Fn([f64; 2]) -> [f64; 2]) -> Result<StokesProblem<'m>> {
    if let Some(e) = method.eps() {
        if !(e > 0.0 && e.is_finite()) {
            return Err(Error::InvalidParameter(format!("eps must be positive, got {e}")));
        }
    }
    let (vk, pk) = method.elements();
    let velocity = FeSpace::vector(mesh, vk);
    let pressure = FeSpace::scalar(mesh, pk);
    let a = stiffness(&velocity);
    let b = divergence(&velocity, &pressure);
    let f_load = load_vector(&velocity, f);
    let n_p = pressure.n_dofs();
    let h = mesh.h();
    let h_k = mesh.h_k();
    let mut g = vec![0.0; n_p];
    let mut projection = None;
    let mut b_lower = None;
    let c = match method {
        StokesMethod::P1P1Plain | StokesMethod::TaylorHood | StokesMethod::Mini | StokesMethod::P2P0 => None,
        StokesMethod::P1P1Loss => {
            let z_space = FeSpace::vector(mesh, ElementKind::P1);
            let s = pressure_grad_stab(&pressure);
            let gz = grad_coupling(&pressure, &z_space);
            let ml = lumped_mass(&z_space);
            let inv: Vec<f64> = ml.iter().map(|m| 1.0 / m).collect();
            let c = s.add_scaled(1.0, &gz.weighted_gram(&inv), -h * h);
            projection = Some((gz, ml));
            Some(c)
        }
        StokesMethod::BrezziPitkaranta(eps) => Some(pressure_grad_stab(&pressure).scale(eps)),
        StokesMethod::GalerkinLS(eps) => {
            let w: Vec<f64> = h_k.iter().map(|hk| eps * hk * hk).collect();
            g = grad_load(&pressure, &w, f).iter().map(|v| -v).collect();
            Some(weighted_stiffness(&pressure, &w))
        }
        StokesMethod::DouglasWang(eps) => {
            let w: Vec<f64> = h_k.iter().map(|hk| eps * hk).collect();
            g = grad_load(&pressure, &w, f);
            b_lower = Some(b.scale(-1.0));
            Some(weighted_stiffness(&pressure, &w).scale(-1.0))
        }
    };
    let mut system = SaddleSystem::new(a, b, c, f_load, g)?;
    system.b_lower = b_lower;
    let bnd = velocity.boundary_dofs();
    let zeros = vec![0.0; bnd.len()];
    let system = system
        .apply_dirichlet(&bnd, &zeros)?
        .with_mean_constraint(mean_vector(&pressure));
    Ok(StokesProblem {
        method,
        velocity,
        pressure,
        system,
        projection,
    })
}

impl<'m> StokesProblem<'m> {
    pub fn mesh(&self) -> &'m Mesh<f64> {
        self.velocity.mesh()
    }

    pub fn solve(&self) -> Result<StokesSolution> {
        let sol = self.system.solve()?;
        let z = self.projection.as_ref().map(|(g, ml)| {
            g.matvec(&sol.p).iter().zip(ml).map(|(v, m)| v / m).collect()
        });
        Ok(StokesSolution {
            u: sol.u,
            p: sol.p,
            z,
            residual_norm: sol.residual_norm,
        })
    }

    /// Solves the loss-reintroduction method in its explicit three-field
    /// form `(u, p, z)` without eliminating `z`. The `z` rows are scaled by
    /// `h²` so the block matrix stays symmetric.
    pub fn solve_three_field(&self) -> Result<StokesSolution> {
        let (gz, ml) = self.projection.as_ref().ok_or_else(|| {
            Error::UnsupportedCombination(format!("{} has no projected-gradient field", self.method))
        })?;
        let mesh = self.mesh();
        let h2 = mesh.h() * mesh.h();
        let sys = &self.system;
        let s = pressure_grad_stab(&self.pressure);
        let (n_u, n_p, n_z) = (sys.n_u(), sys.n_p(), ml.len());
        let m = sys.mean_vector.clone().unwrap_or_default();
        let mcol = CsrMatrix::from_triplets(n_p, 1, &m.iter().enumerate().map(|(i, &v)| (i, 0, v)).collect::<Vec<_>>())?;
        let bt = sys.b.transpose();
        let gzt = gz.transpose();
        let ml_mat = CsrMatrix::from_diagonal(ml);
        let mct = mcol.transpose();
        let k = block_matrix(
            &[n_u, n_p, n_z, 1],
            &[n_u, n_p, n_z, 1],
            &[
                (0, 0, &sys.a, 1.0),
                (0, 1, &bt, 1.0),
                (1, 0, &sys.b, 1.0),
                (1, 1, &s, -1.0),
                (1, 2, &gzt, h2),
                (2, 1, gz, h2),
                (2, 2, &ml_mat, -h2),
                (1, 3, &mcol, 1.0),
                (3, 1, &mct, 1.0),
            ],
        );
        let mut r = sys.f.clone();
        r.extend_from_slice(&sys.g);
        r.extend(std::iter::repeat_n(0.0, n_z + 1));
        let x = if k.rows() <= crate::assembly::DENSE_SOLVE_LIMIT {
            lu_solve(&k.to_dense(), &r)?
        } else {
            BandedLu::new(&k)?.solve(&r)
        };
        let kx = k.matvec(&x);
        let res: f64 = kx.iter().zip(&r).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let rn: f64 = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        Ok(StokesSolution {
            u: x[..n_u].to_vec(),
            p: x[n_u..n_u + n_p].to_vec(),
            z: Some(x[n_u + n_p..n_u + n_p + n_z].to_vec()),
            residual_norm: if rn > 0.0 { res / rn } else { res },
        })
    }

    /// Relative residuals of the two block rows: `‖A u + Bᵀp − f‖/‖f‖` and
    /// `‖B_low u − C p − g‖/‖f‖`.
    pub fn block_residuals(&self, sol: &StokesSolution) -> (f64, f64) {
        let sys = &self.system;
        let au = sys.a.matvec(&sol.u);
        let btp = sys.b.tr_matvec(&sol.p);
        let lower = sys.b_lower.as_ref().unwrap_or(&sys.b);
        let bu = lower.matvec(&sol.u);
        let cp = sys.c.matvec(&sol.p);
        let fnorm = sys.f.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
        let r1: f64 = (0..sys.n_u()).map(|i| (au[i] + btp[i] - sys.f[i]).powi(2)).sum::<f64>().sqrt();
        let r2: f64 = (0..sys.n_p()).map(|q| (bu[q] - cp[q] - sys.g[q]).powi(2)).sum::<f64>().sqrt();
        (r1 / fnorm, r2 / fnorm)
    }

    /// `|∫p_h|`.
    pub fn pressure_mean(&self, sol: &StokesSolution) -> f64 {
        mean_vector(&self.pressure).iter().zip(&sol.p).map(|(m, p)| m * p).sum::<f64>().abs()
    }

    pub fn errors(&self, sol: &StokesSolution, exact: &Manufactured) -> StokesErrors {
        let (err_u_l2, err_u_h1) = velocity_errors(
            &self.velocity,
            &sol.u,
            |x| exact.velocity(x),
            |x| exact.velocity_gradient(x),
        );
        StokesErrors {
            err_u_l2,
            err_u_h1,
            err_p_l2: pressure_error(&self.pressure, &sol.p, |x| exact.pressure(x)),
        }
    }
}

/// `(‖u − u_h‖_{L²}, |u − u_h|_{H¹})` by degree-6 quadrature.
pub fn velocity_errors(
    space: &FeSpace<'_, f64>,
    u: &[f64],
    exact: impl Fn([f64; 2]) -> [f64; 2],
    exact_grad: impl Fn([f64; 2]) -> [[f64; 2]; 2],
) -> (f64, f64) {
    let mesh = space.mesh();
    let rule = quadrature::<f64>(ERROR_DEGREE).expect("tabulated");
    let (mut l2, mut h1) = (0.0, 0.0);
    for t in 0..mesh.n_triangles() {
        let geom = mesh.geometry(t);
        for (l, w) in rule.iter() {
            let x = geom.map(l);
            let ue = exact(x);
            let ge = exact_grad(x);
            let jw = w * geom.area;
            for c in 0..2 {
                let uh = space.eval(u, c, t, l);
                let gh = space.eval_grad(u, c, t, l, &geom);
                l2 += jw * (uh - ue[c]).powi(2);
                h1 += jw * ((gh[0] - ge[c][0]).powi(2) + (gh[1] - ge[c][1]).powi(2));
            }
        }
    }
    (l2.sqrt(), h1.sqrt())
}

// Continuous pressures are compared with the exact pressure shifted by its
// discrete mean; P0 pressures with the element averages of that field.
pub fn pressure_error(space: &FeSpace<'_, f64>, p: &[f64], exact: impl Fn([f64; 2]) -> f64) -> f64 {
    let mesh = space.mesh();
    let rule = quadrature::<f64>(ERROR_DEGREE).expect("tabulated");
    let mut mean = 0.0;
    for t in 0..mesh.n_triangles() {
        let geom = mesh.geometry(t);
        for (l, w) in rule.iter() {
            mean += w * geom.area * exact(geom.map(l));
        }
    }
    let mut err = 0.0;
    for t in 0..mesh.n_triangles() {
        let geom = mesh.geometry(t);
        if space.kind() == ElementKind::P0 {
            let avg: f64 = rule.iter().map(|(l, w)| w * exact(geom.map(l))).sum::<f64>() - mean;
            err += geom.area * (p[t] - avg).powi(2);
        } else {
            for (l, w) in rule.iter() {
                let pe = exact(geom.map(l)) - mean;
                err += w * geom.area * (space.eval(p, 0, t, l) - pe).powi(2);
            }
        }
    }
    err.sqrt()
}

/// Sum over interior edges of the pressure jump between the two sides
/// (neighbouring cells for P0, edge endpoints for nodal spaces), divided by
/// the Euclidean norm of the pressure vector.
pub fn oscillation_indicator(space: &FeSpace<'_, f64>, p: &[f64]) -> f64 {
    let mesh = space.mesh();
    let norm = p.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return 0.0;
    }
    let total: f64 = mesh
        .edges()
        .iter()
        .filter(|e| !e.is_boundary())
        .map(|e| match space.kind() {
            ElementKind::P0 => (p[e.triangles[0]] - p[e.triangles[1]]).abs(),
            _ => (p[e.nodes[0]] - p[e.nodes[1]]).abs(),
        })
        .sum();
    total / norm
}

/// Root mean square of `∂p_h/∂n` over the boundary, a diagnostic for the
/// artificial Neumann condition induced by pressure-Laplacian penalties.
pub fn boundary_normal_gradient(space: &FeSpace<'_, f64>, p: &[f64]) -> f64 {
    let mesh = space.mesh();
    let (mut acc, mut len_total) = (0.0, 0.0);
    for e in mesh.boundary_edges() {
        let (len, n) = mesh.boundary_edge_frame(e);
        let geom = mesh.geometry(e.triangle);
        // midpoint of the edge in barycentric coordinates of its triangle
        let tri = mesh.triangles()[e.triangle];
        let l: [f64; 3] = std::array::from_fn(|k| if tri[k] == e.a || tri[k] == e.b { 0.5 } else { 0.0 });
        let g = space.eval_grad(p, 0, e.triangle, &l, &geom);
        acc += len * (g[0] * n[0] + g[1] * n[1]).powi(2);
        len_total += len;
    }
    (acc / len_total).sqrt()
}
