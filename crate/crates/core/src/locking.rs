//! The penalized functional `½‖∇v‖² + λ/2 ‖v − ∇q‖² − (f, v) − (g, q)` on
//! zero-trace P1 spaces: the plain discretization that locks, the
//! projection-corrected one, and the multiplier reformulation with
//! `γ = λ(u − ∇p)`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::assembly::{
    grad_coupling, load_scalar, load_vector, lumped_mass, mass, solve_linear, stiffness, SaddleSystem,
};
use crate::error::{Error, Result};
use crate::fespace::{quadrature, shape_gradients, shape_values, ElementKind, FeSpace};
use crate::linalg::decomp::left_solve_lower;
use crate::linalg::{block_matrix, cholesky, lu_solve, sym_eig, CsrMatrix, Triplets};
use crate::mesh::Mesh;

/// `c_Ω` for the unit square: `1/√λ₁` with `λ₁ = 2π²`.
pub const POINCARE_UNIT_SQUARE: f64 = 1.0 / (PI * std::f64::consts::SQRT_2);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LockingMethod {
    Plain,
    Corrected,
    Multiplier,
}

impl LockingMethod {
    pub const NAMES: [&'static str; 3] = ["plain", "corrected", "multiplier"];

    pub fn name(self) -> &'static str {
        match self {
            Self::Plain => "plain",
            Self::Corrected => "corrected",
            Self::Multiplier => "multiplier",
        }
    }
}

impl fmt::Display for LockingMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LockingMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain" => Ok(Self::Plain),
            "corrected" => Ok(Self::Corrected),
            "multiplier" => Ok(Self::Multiplier),
            _ => Err(Error::InvalidParameter(format!(
                "unknown locking method '{s}' (expected one of {})",
                Self::NAMES.join(", ")
            ))),
        }
    }
}

/// Space for the multiplier `γ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MultiplierSpace {
    /// Discontinuous P1 vectors. Contains `u − ∇p` for every discrete pair,
    /// so eliminating `γ` gives back the plain system.
    Broken,
    /// The zero-trace continuous P1 velocity space.
    Continuous,
}

/// Mass matrix used for the projection `w = Π∇p` in the corrected form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProjectionMass {
    /// Exact L² projection onto the velocity space.
    Consistent,
    /// Row-sum lumped mass; diagonal, but the correction no longer cancels
    /// the excess coercivity exactly.
    Lumped,
}

pub type VectorLoad = Arc<dyn Fn([f64; 2]) -> [f64; 2] + Send + Sync>;
pub type ScalarLoad = Arc<dyn Fn([f64; 2]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct Loads {
    pub f: VectorLoad,
    pub g: ScalarLoad,
}

impl Loads {
    pub fn new(f: impl Fn([f64; 2]) -> [f64; 2] + Send + Sync + 'static, g: impl Fn([f64; 2]) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            f: Arc::new(f),
            g: Arc::new(g),
        }
    }

    pub fn zero() -> Self {
        Self::new(|_| [0.0, 0.0], |_| 0.0)
    }
}

impl Default for Loads {
    /// `f = (1, 1)`, `g = 0`.
    fn default() -> Self {
        Self::new(|_| [1.0, 1.0], |_| 0.0)
    }
}

impl fmt::Debug for Loads {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Loads { .. }")
    }
}

#[derive(Debug, Clone)]
pub struct LockingConfig {
    pub lambda: f64,
    pub poincare_const: f64,
    pub n: usize,
    pub method: LockingMethod,
    pub loads: Loads,
    pub multiplier_space: MultiplierSpace,
    /// Adds `(u − ∇p, v − ∇q)` to the `(u, p)` block of the multiplier form.
    pub augmented: bool,
    pub projection: ProjectionMass,
}

impl LockingConfig {
    pub fn new(method: LockingMethod, lambda: f64, n: usize) -> Self {
        Self {
            lambda,
            poincare_const: POINCARE_UNIT_SQUARE,
            n,
            method,
            loads: Loads::default(),
            multiplier_space: MultiplierSpace::Broken,
            augmented: false,
            projection: ProjectionMass::Consistent,
        }
    }

    pub fn with_loads(mut self, loads: Loads) -> Self {
        self.loads = loads;
        self
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    // λ = 0 is accepted so that the degenerate plain system can be built;
    // its pressure block is then singular.
    fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!("lambda must be finite and >= 0, got {}", self.lambda)));
        }
        if !(self.poincare_const > 0.0 && self.poincare_const.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "poincare constant must be positive, got {}",
                self.poincare_const
            )));
        }
        Ok(())
    }

    /// Splits `λ` into the weights `(c λ/(λ + c), λ²/(λ + c))` of the
    /// corrected pressure row; they sum to `λ`.
    pub fn corrected_coefficients(&self) -> (f64, f64) {
        let (l, c) = (self.lambda, self.poincare_const);
        (c * l / (l + c), l * l / (l + c))
    }
}

/// Free-dof operators shared by all formulations.
struct Operators {
    /// Vector stiffness.
    k: CsrMatrix<f64>,
    /// Vector mass.
    m: CsrMatrix<f64>,
    /// `G[v, p] = (φ_v, ∇ψ_p)`.
    g: CsrMatrix<f64>,
    /// Scalar stiffness of the pressure.
    s: CsrMatrix<f64>,
    /// Lumped vector mass.
    ml: Vec<f64>,
    f: Vec<f64>,
    gl: Vec<f64>,
}

fn operators(mesh: &Mesh<f64>, loads: &Loads) -> Operators {
    let v = FeSpace::vector(mesh, ElementKind::P1);
    let q = FeSpace::scalar(mesh, ElementKind::P1);
    let fv = v.free_dofs();
    let fq = q.free_dofs();
    let pick = |x: &[f64], idx: &[usize]| idx.iter().map(|&i| x[i]).collect::<Vec<_>>();
    let f = loads.f.clone();
    let g = loads.g.clone();
    Operators {
        k: stiffness(&v).select(&fv, &fv),
        m: mass(&v).select(&fv, &fv),
        g: grad_coupling(&q, &v).select(&fv, &fq),
        s: stiffness(&q).select(&fq, &fq),
        ml: pick(&lumped_mass(&v), &fv),
        f: pick(&load_vector(&v, move |x| f(x)), &fv),
        gl: pick(&load_scalar(&q, move |x| g(x)), &fq),
    }
}

/// Assembled linear system with unknowns ordered `(u, p, extra)`.
#[derive(Debug, Clone)]
pub struct LockingSystem {
    pub matrix: CsrMatrix<f64>,
    pub rhs: Vec<f64>,
    pub n_u: usize,
    pub n_p: usize,
    /// `w` for the corrected form, `γ` for the multiplier form.
    pub n_extra: usize,
    k: CsrMatrix<f64>,
    s: CsrMatrix<f64>,
}

#[derive(Debug, Clone)]
pub struct LockingSolution {
    pub u: Vec<f64>,
    pub p: Vec<f64>,
    pub extra: Vec<f64>,
}

impl LockingSystem {
    pub fn dim(&self) -> usize {
        self.n_u + self.n_p + self.n_extra
    }

    pub fn solve(&self) -> Result<LockingSolution> {
        let x = solve_linear(&self.matrix, &self.rhs)?;
        Ok(self.split(x))
    }

    fn split(&self, mut x: Vec<f64>) -> LockingSolution {
        let extra = x.split_off(self.n_u + self.n_p);
        let p = x.split_off(self.n_u);
        LockingSolution { u: x, p, extra }
    }

    /// Zero-trace `H¹` seminorm of the velocity.
    pub fn u_h1(&self, u: &[f64]) -> f64 {
        self.k.bilinear(u, u).max(0.0).sqrt()
    }

    pub fn p_h1(&self, p: &[f64]) -> f64 {
        self.s.bilinear(p, p).max(0.0).sqrt()
    }
}

/// `Φ((u,p),(v,q)) = (∇u, ∇v) + λ(u − ∇p, v − ∇q)`.
pub fn build_plain(config: &LockingConfig) -> Result<LockingSystem> {
    config.validate()?;
    let mesh = Mesh::unit_square(config.n)?;
    let op = operators(&mesh, &config.loads);
    let l = config.lambda;
    let (n_u, n_p) = (op.k.rows(), op.s.rows());
    let gt = op.g.transpose();
    let matrix = block_matrix(
        &[n_u, n_p],
        &[n_u, n_p],
        &[(0, 0, &op.k, 1.0), (0, 0, &op.m, l), (0, 1, &op.g, -l), (1, 0, &gt, -l), (1, 1, &op.s, l)],
    );
    Ok(LockingSystem {
        matrix,
        rhs: [op.f, op.gl].concat(),
        n_u,
        n_p,
        n_extra: 0,
        k: op.k,
        s: op.s,
    })
}

/// Corrected form with `w = Π∇p` as an explicit unknown. The `w` row is scaled by `λ²/(λ + c)` so that the
/// matrix is symmetric.
pub fn build_corrected(config: &LockingConfig) -> Result<LockingSystem> {
    config.validate()?;
    let mesh = Mesh::unit_square(config.n)?;
    let op = operators(&mesh, &config.loads);
    let l = config.lambda;
    let (a, b) = config.corrected_coefficients();
    let (n_u, n_p) = (op.k.rows(), op.s.rows());
    let gt = op.g.transpose();
    let proj = match config.projection {
        ProjectionMass::Consistent => op.m.clone(),
        ProjectionMass::Lumped => CsrMatrix::from_diagonal(&op.ml),
    };
    let matrix = block_matrix(
        &[n_u, n_p, n_u],
        &[n_u, n_p, n_u],
        &[
            (0, 0, &op.k, 1.0),
            (0, 0, &op.m, l),
            (0, 1, &op.g, -l),
            (1, 0, &gt, -l),
            (1, 1, &op.s, a),
            (1, 2, &gt, b),
            (2, 1, &op.g, b),
            (2, 2, &proj, -b),
        ],
    );
    Ok(LockingSystem {
        matrix,
        rhs: [op.f, op.gl, vec![0.0; n_u]].concat(),
        n_u,
        n_p,
        n_extra: n_u,
        k: op.k,
        s: op.s,
    })
}

/// Corrected form with `w = M⁻¹ G p` substituted (`M` lumped or consistent).
pub fn build_corrected_eliminated(config: &LockingConfig) -> Result<LockingSystem> {
    config.validate()?;
    let mesh = Mesh::unit_square(config.n)?;
    let op = operators(&mesh, &config.loads);
    let l = config.lambda;
    let (a, b) = config.corrected_coefficients();
    let (n_u, n_p) = (op.k.rows(), op.s.rows());
    let gt = op.g.transpose();
    let schur = projected_gram(&op, config.projection)?;
    let matrix = block_matrix(
        &[n_u, n_p],
        &[n_u, n_p],
        &[
            (0, 0, &op.k, 1.0),
            (0, 0, &op.m, l),
            (0, 1, &op.g, -l),
            (1, 0, &gt, -l),
            (1, 1, &op.s, a),
            (1, 1, &schur, b),
        ],
    );
    Ok(LockingSystem {
        matrix,
        rhs: [op.f, op.gl].concat(),
        n_u,
        n_p,
        n_extra: 0,
        k: op.k,
        s: op.s,
    })
}

// Gᵀ M⁻¹ G
fn projected_gram(op: &Operators, projection: ProjectionMass) -> Result<CsrMatrix<f64>> {
    match projection {
        ProjectionMass::Lumped => {
            let inv: Vec<f64> = op.ml.iter().map(|&x| 1.0 / x).collect();
            Ok(op.g.weighted_gram(&inv))
        }
        ProjectionMass::Consistent => {
            let l = cholesky(&op.m.to_dense())?;
            let y = left_solve_lower(&l, &op.g.to_dense());
            Ok(CsrMatrix::from_dense(&y.transpose().matmul(&y)))
        }
    }
}

// w = M⁻¹ G q
fn project_gradient(op: &Operators, projection: ProjectionMass, q: &[f64]) -> Result<Vec<f64>> {
    let gq = op.g.matvec(q);
    match projection {
        ProjectionMass::Lumped => Ok(gq.iter().zip(&op.ml).map(|(a, m)| a / m).collect()),
        ProjectionMass::Consistent => lu_solve(&op.m.to_dense(), &gq),
    }
}

/// Blocks of the multiplier form: `[[A_X, Bᵀ], [B, −(1/λ) M_γ]]` with
/// `B(u, p) = (δ, u − ∇p)`.
#[derive(Debug, Clone)]
pub struct MultiplierBlocks {
    pub system: SaddleSystem<f64>,
    pub m_gamma: CsrMatrix<f64>,
    pub n_u: usize,
    pub n_p: usize,
}

pub fn build_multiplier(config: &LockingConfig) -> Result<MultiplierBlocks> {
    config.validate()?;
    if config.lambda == 0.0 {
        return Err(Error::InvalidParameter("multiplier form needs lambda > 0".into()));
    }
    let mesh = Mesh::unit_square(config.n)?;
    let op = operators(&mesh, &config.loads);
    let (n_u, n_p) = (op.k.rows(), op.s.rows());
    let (m_gamma, b) = match config.multiplier_space {
        MultiplierSpace::Continuous => {
            let neg_g = op.g.scale(-1.0);
            let b = block_matrix(&[n_u], &[n_u, n_p], &[(0, 0, &op.m, 1.0), (0, 1, &neg_g, 1.0)]);
            (op.m.clone(), b)
        }
        MultiplierSpace::Broken => broken_coupling(&mesh)?,
    };
    let zero_p = CsrMatrix::zeros(n_p, n_p);
    let mut blocks = vec![(0, 0, &op.k, 1.0), (1, 1, &zero_p, 1.0)];
    let gt = op.g.transpose();
    if config.augmented {
        blocks.extend([(0, 0, &op.m, 1.0), (0, 1, &op.g, -1.0), (1, 0, &gt, -1.0), (1, 1, &op.s, 1.0)]);
    }
    let a_x = block_matrix(&[n_u, n_p], &[n_u, n_p], &blocks);
    let c = m_gamma.scale(1.0 / config.lambda);
    let n_gamma = m_gamma.rows();
    let system = SaddleSystem::new(a_x, b, Some(c), [op.f, op.gl].concat(), vec![0.0; n_gamma])?;
    Ok(MultiplierBlocks {
        system,
        m_gamma,
        n_u,
        n_p,
    })
}

// Broken P1 vector multipliers, numbered component-major with local dof
// 3t + i. Returns (M_γ, B) restricted to the free (u, p) dofs.
fn broken_coupling(mesh: &Mesh<f64>) -> Result<(CsrMatrix<f64>, CsrMatrix<f64>)> {
    let v = FeSpace::vector(mesh, ElementKind::P1);
    let q = FeSpace::scalar(mesh, ElementKind::P1);
    let nt = mesh.n_triangles();
    let ng = 2 * 3 * nt;
    let (nv, nq) = (v.n_dofs(), q.n_dofs());
    let ns = v.n_scalar_dofs();
    let rule = quadrature::<f64>(2)?;
    let mut tm = Triplets::with_capacity(ng, ng, nt * 18);
    let mut tb = Triplets::with_capacity(ng, nv + nq, nt * 36);
    for t in 0..nt {
        let geom = mesh.geometry(t);
        let nodes = q.scalar_cell_dofs(t).to_vec();
        // P1 gradients are constant on the cell
        let grads = shape_gradients(ElementKind::P1, &rule.points[0], &geom);
        for (pt, w) in rule.iter() {
            let phi = shape_values(ElementKind::P1, pt);
            let jw = w * geom.area;
            for c in 0..2 {
                for i in 0..3 {
                    let row = c * 3 * nt + 3 * t + i;
                    for j in 0..3 {
                        let mij = jw * phi[i] * phi[j];
                        tm.push(row, c * 3 * nt + 3 * t + j, mij);
                        tb.push(row, c * ns + nodes[j], mij);
                        tb.push(row, nv + nodes[j], -jw * phi[i] * grads[j][c]);
                    }
                }
            }
        }
    }
    let free: Vec<usize> = v
        .free_dofs()
        .into_iter()
        .chain(q.free_dofs().into_iter().map(|d| nv + d))
        .collect();
    let rows: Vec<usize> = (0..ng).collect();
    Ok((tm.into_csr(), tb.into_csr().select(&rows, &free)))
}

impl MultiplierBlocks {
    /// `A_X + λ Bᵀ M_γ⁻¹ B`, the `(u, p)` matrix left after eliminating `γ`.
    pub fn eliminated(&self, lambda: f64) -> Result<CsrMatrix<f64>> {
        let b = self.system.b.to_dense();
        let lm = crate::linalg::LuFactor::new(self.m_gamma.to_dense())?;
        let n = b.cols();
        let mut out = self.system.a.to_dense();
        let mut cols = Vec::with_capacity(n);
        for j in 0..n {
            cols.push(lm.solve(&b.column(j)));
        }
        for i in 0..n {
            let bi = b.column(i);
            for (j, mj) in cols.iter().enumerate() {
                out[(i, j)] += lambda * bi.iter().zip(mj).map(|(x, y)| x * y).sum::<f64>();
            }
        }
        Ok(CsrMatrix::from_dense(&out))
    }

    pub fn solve(&self) -> Result<LockingSolution> {
        let sol = self.system.solve()?;
        let mut x = sol.u;
        let p = x.split_off(self.n_u);
        Ok(LockingSolution { u: x, p, extra: sol.p })
    }

    /// `‖γ − λ Π(u − ∇p)‖ / ‖γ‖` in the `M_γ` norm, where `Π` is the
    /// projection onto the multiplier space.
    pub fn multiplier_discrepancy(&self, sol: &LockingSolution, lambda: f64) -> Result<f64> {
        let x = [sol.u.as_slice(), sol.p.as_slice()].concat();
        let rhs: Vec<f64> = self.system.b.matvec(&x).into_iter().map(|v| lambda * v).collect();
        let target = lu_solve(&self.m_gamma.to_dense(), &rhs)?;
        let d: Vec<f64> = sol.extra.iter().zip(&target).map(|(a, b)| a - b).collect();
        let num = self.m_gamma.bilinear(&d, &d).max(0.0).sqrt();
        let den = self.m_gamma.bilinear(&sol.extra, &sol.extra).max(0.0).sqrt();
        Ok(if den > 0.0 { num / den } else { num })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LockingReport {
    pub u_h1_norm: f64,
    pub p_h1_norm: f64,
    pub lambda: f64,
    pub method: LockingMethod,
    pub solve_ok: bool,
    /// Failure message when `solve_ok` is false.
    pub error: Option<String>,
}

/// Solves one configuration; solver failures are reported, not returned.
pub fn run(config: &LockingConfig) -> Result<LockingReport> {
    let outcome = solve_norms(config);
    let report = |u, p, ok, error| LockingReport {
        u_h1_norm: u,
        p_h1_norm: p,
        lambda: config.lambda,
        method: config.method,
        solve_ok: ok,
        error,
    };
    match outcome {
        Ok((u, p)) => Ok(report(u, p, true, None)),
        Err(e @ (Error::SingularMatrix { .. } | Error::NonFinite)) => Ok(report(f64::NAN, f64::NAN, false, Some(e.to_string()))),
        Err(e) => Err(e),
    }
}

fn solve_norms(config: &LockingConfig) -> Result<(f64, f64)> {
    let (u, p, sys) = match config.method {
        LockingMethod::Plain => {
            let sys = build_plain(config)?;
            let s = sys.solve()?;
            (s.u, s.p, sys)
        }
        LockingMethod::Corrected => {
            let sys = build_corrected(config)?;
            let s = sys.solve()?;
            (s.u, s.p, sys)
        }
        LockingMethod::Multiplier => {
            let blocks = build_multiplier(config)?;
            let s = blocks.solve()?;
            // norms only need the (u, p) stiffness
            let sys = build_plain(&config.clone().with_loads(Loads::zero()))?;
            (s.u, s.p, sys)
        }
    };
    let (nu, np) = (sys.u_h1(&u), sys.p_h1(&p));
    if nu.is_finite() && np.is_finite() {
        Ok((nu, np))
    } else {
        Err(Error::NonFinite)
    }
}

/// One report per `λ`, with mesh and loads fixed.
pub fn lambda_sweep(config: &LockingConfig, lambdas: &[f64]) -> Result<Vec<LockingReport>> {
    lambdas.iter().map(|&l| run(&config.clone().with_lambda(l))).collect()
}

/// Smallest eigenvalue of the plain `Φ` matrix.
pub fn plain_min_eigenvalue(n: usize, lambda: f64) -> Result<f64> {
    let sys = build_plain(&LockingConfig::new(LockingMethod::Plain, lambda, n).with_loads(Loads::zero()))?;
    let eig = sym_eig(&sys.matrix.to_dense())?;
    Ok(eig.values.iter().copied().fold(f64::INFINITY, f64::min))
}

/// `(‖∇q − Π∇q‖², ‖∇q‖²)` for the zero-trace P1 interpolant of `q`.
pub fn projection_defect(n: usize, projection: ProjectionMass, q: impl Fn([f64; 2]) -> f64) -> Result<(f64, f64)> {
    let mesh = Mesh::unit_square(n)?;
    let op = operators(&mesh, &Loads::zero());
    let qs = FeSpace::scalar(&mesh, ElementKind::P1);
    let all = qs.interpolate(q);
    let qh: Vec<f64> = qs.free_dofs().iter().map(|&i| all[i]).collect();
    let gq = op.g.matvec(&qh);
    let w = project_gradient(&op, projection, &qh)?;
    let grad2 = op.s.bilinear(&qh, &qh);
    // ‖∇q − w‖² = ‖∇q‖² − 2(w, ∇q) + (w, w)
    let cross: f64 = w.iter().zip(&gq).map(|(a, b)| a * b).sum();
    let defect = grad2 - 2.0 * cross + op.m.bilinear(&w, &w);
    Ok((defect.max(0.0), grad2))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(method: LockingMethod, lambda: f64, n: usize) -> LockingConfig {
        LockingConfig::new(method, lambda, n)
    }

    #[test]
    fn coefficient_split_sums_to_lambda() {
        for l in [1e-3, 1.0, 1e2, 1e8] {
            let (a, b) = cfg(LockingMethod::Corrected, l, 2).corrected_coefficients();
            assert!((a + b - l).abs() <= 1e-14 * l);
        }
    }

    #[test]
    fn zero_loads_give_zero_solutions() {
        for method in [LockingMethod::Plain, LockingMethod::Corrected, LockingMethod::Multiplier] {
            let r = run(&cfg(method, 1e4, 4).with_loads(Loads::zero())).unwrap();
            assert!(r.solve_ok);
            assert_eq!(r.u_h1_norm, 0.0, "{method}");
            assert_eq!(r.p_h1_norm, 0.0, "{method}");
        }
    }

    #[test]
    fn plain_is_symmetric_and_degenerate_at_zero_lambda() {
        let sys = build_plain(&cfg(LockingMethod::Plain, 1e3, 4)).unwrap();
        assert!(sys.matrix.asymmetry() <= 1e-12);
        let r = run(&cfg(LockingMethod::Plain, 0.0, 4)).unwrap();
        assert!(!r.solve_ok);
        assert!(r.error.unwrap().contains("singular"));
        assert!(build_plain(&cfg(LockingMethod::Plain, -1.0, 4)).is_err());
    }

    #[test]
    fn corrected_forms_agree() {
        for (n, projection) in [(4, ProjectionMass::Lumped), (8, ProjectionMass::Lumped), (4, ProjectionMass::Consistent), (8, ProjectionMass::Consistent)] {
            let mut c = cfg(LockingMethod::Corrected, 1e4, n);
            c.projection = projection;
            let full = build_corrected(&c).unwrap();
            assert!(full.matrix.asymmetry() <= 1e-12);
            let a = full.solve().unwrap();
            let b = build_corrected_eliminated(&c).unwrap().solve().unwrap();
            let scale = a.u.iter().chain(&a.p).fold(0.0f64, |m, x| m.max(x.abs()));
            for (x, y) in a.u.iter().chain(&a.p).zip(b.u.iter().chain(&b.p)) {
                assert!((x - y).abs() <= 1e-9 * scale, "{x} vs {y}");
            }
        }
    }

    #[test]
    fn broken_multiplier_eliminates_to_plain() {
        for lambda in [1.0, 1e3, 1e6] {
            let c = cfg(LockingMethod::Multiplier, lambda, 4);
            let blocks = build_multiplier(&c).unwrap();
            let elim = blocks.eliminated(lambda).unwrap();
            let plain = build_plain(&c).unwrap().matrix;
            let diff = elim.add_scaled(1.0, &plain, -1.0).frobenius_norm();
            assert!(diff <= 1e-12 * plain.frobenius_norm(), "lambda {lambda}: {diff}");
        }
    }

    #[test]
    fn recovered_multiplier_matches_penalty() {
        let c = cfg(LockingMethod::Multiplier, 1e4, 6);
        let blocks = build_multiplier(&c).unwrap();
        let sol = blocks.solve().unwrap();
        assert!(blocks.multiplier_discrepancy(&sol, c.lambda).unwrap() <= 1e-6);
    }

    #[test]
    fn single_lambda_gives_single_report() {
        let r = lambda_sweep(&cfg(LockingMethod::Plain, 1.0, 4), &[10.0]).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].lambda, 10.0);
    }

    #[test]
    fn projection_defect_vanishes_with_refinement() {
        let q = |x: [f64; 2]| (PI * x[0]).sin().powi(2) * (PI * x[1]).sin().powi(2);
        for projection in [ProjectionMass::Consistent, ProjectionMass::Lumped] {
            let rel = |n| {
                let (d, g) = projection_defect(n, projection, q).unwrap();
                d / g
            };
            let (r4, r8, r16) = (rel(4), rel(8), rel(16));
            assert!(r8 < 0.5 * r4 && r16 < 0.5 * r8, "{projection:?}: {r4} {r8} {r16}");
        }
    }
}
