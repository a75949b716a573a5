//! Convergence studies: per-level errors and least-squares rates.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::stokes::{self, Manufactured, StokesMethod};
use crate::weakbc::{self, WeakBcManufactured, WeakBcMethod, WeakBcOptions};

/// Environment variable holding the worker count.
pub const THREADS_VAR: &str = "INFSUP_LAB_THREADS";

/// Worker count from `INFSUP_LAB_THREADS`, default 1.
pub fn worker_count() -> usize {
    std::env::var(THREADS_VAR)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or(1)
}

/// Maps `f` over `items` on up to `threads` scoped workers, keeping order.
/// Workers pull the next unclaimed item, so uneven costs balance out.
pub fn par_map<I, R, F>(items: &[I], threads: usize, f: F) -> Vec<R>
where
    I: Sync,
    R: Send,
    F: Fn(&I) -> R + Sync,
{
    let threads = threads.clamp(1, items.len().max(1));
    if threads == 1 {
        return items.iter().map(&f).collect();
    }
    let next = AtomicUsize::new(0);
    let mut tagged: Vec<(usize, R)> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..threads)
            .map(|_| {
                s.spawn(|| {
                    let mut out = Vec::new();
                    loop {
                        let i = next.fetch_add(1, Ordering::Relaxed);
                        let Some(item) = items.get(i) else { break };
                        out.push((i, f(item)));
                    }
                    out
                })
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
    });
    tagged.sort_by_key(|(i, _)| *i);
    tagged.into_iter().map(|(_, r)| r).collect()
}

/// Ordinary least-squares slope of `log e` against `log h`.
pub fn fit_slope(hs: &[f64], errs: &[f64]) -> Result<f64> {
    if hs.len() != errs.len() {
        return Err(Error::DimensionMismatch(format!("{} mesh sizes, {} errors", hs.len(), errs.len())));
    }
    let ok = |v: &f64| *v > 0.0 && v.is_finite();
    let positive = hs.iter().zip(errs).filter(|(h, e)| ok(h) && ok(e)).count();
    if positive < 2 || positive != hs.len() {
        return Err(Error::DegenerateFit(positive));
    }
    let n = hs.len() as f64;
    let x: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
    let y: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateFit(1));
    }
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    Ok(sxy / sxx)
}

/// Mesh size and named errors of one level.
pub type LevelResult = Result<(f64, Vec<(String, f64)>)>;

#[derive(Debug, Clone, PartialEq)]
pub struct Level {
    pub n: usize,
    pub h: f64,
    /// Named errors in a fixed order.
    pub errors: Vec<(String, f64)>,
}

impl Level {
    pub fn error(&self, name: &str) -> Option<f64> {
        self.errors.iter().find(|(k, _)| k == name).map(|&(_, v)| v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub method: String,
    pub problem: String,
    /// Successful levels, sorted by decreasing `h`.
    pub levels: Vec<Level>,
    /// Levels that failed to solve.
    pub failures: Vec<(usize, Error)>,
    /// Fitted rates; empty when fewer than three levels succeeded or any failed.
    pub slopes: BTreeMap<String, f64>,
}

impl ConvergenceReport {
    /// Assembles a report from per-level outcomes and fits the slopes.
    pub fn from_levels(method: &str, problem: &str, outcomes: Vec<(usize, LevelResult)>) -> Self {
        let mut levels = Vec::new();
        let mut failures = Vec::new();
        for (n, r) in outcomes {
            match r {
                Ok((h, errors)) => levels.push(Level { n, h, errors }),
                Err(e) => failures.push((n, e)),
            }
        }
        levels.sort_by(|a, b| b.h.total_cmp(&a.h));
        let mut slopes = BTreeMap::new();
        if failures.is_empty() && levels.len() >= 3 {
            let hs: Vec<f64> = levels.iter().map(|l| l.h).collect();
            for (name, _) in &levels[0].errors {
                let es: Option<Vec<f64>> = levels.iter().map(|l| l.error(name)).collect();
                if let Some(es) = es {
                    if let Ok(s) = fit_slope(&hs, &es) {
                        slopes.insert(name.clone(), s);
                    }
                }
            }
        }
        Self {
            method: method.to_string(),
            problem: problem.to_string(),
            levels,
            failures,
            slopes,
        }
    }

    pub fn slope(&self, name: &str) -> Option<f64> {
        self.slopes.get(name).copied()
    }

    /// Names of the error columns.
    pub fn error_names(&self) -> Vec<String> {
        self.levels
            .first()
            .map(|l| l.errors.iter().map(|(k, _)| k.clone()).collect())
            .unwrap_or_default()
    }
}

/// Runs `level(n) -> (h, errors)` for every `n` and fits slopes.
pub fn run_convergence<F>(method: &str, problem: &str, ns: &[usize], threads: usize, level: F) -> Result<ConvergenceReport>
where
    F: Fn(usize) -> LevelResult + Sync,
{
    if ns.len() < 3 {
        return Err(Error::InvalidParameter(format!("a convergence study needs at least 3 mesh sizes, got {}", ns.len())));
    }
    let outcomes = par_map(ns, threads, |&n| (n, level(n)));
    Ok(ConvergenceReport::from_levels(method, problem, outcomes))
}

/// Errors of one Stokes solve against the manufactured solution.
pub fn stokes_level(method: StokesMethod, n: usize) -> LevelResult {
    let mesh = Mesh::unit_square(n)?;
    let exact = Manufactured;
    let problem = stokes::build(method, &mesh, &|x| exact.force(x))?;
    let sol = problem.solve()?;
    let e = problem.errors(&sol, &exact);
    Ok((
        mesh.h(),
        vec![
            ("err_u_l2".into(), e.err_u_l2),
            ("err_u_h1".into(), e.err_u_h1),
            ("err_p_l2".into(), e.err_p_l2),
        ],
    ))
}

pub fn stokes_convergence(method: StokesMethod, ns: &[usize], threads: usize) -> Result<ConvergenceReport> {
    run_convergence(method.name(), "stokes-mms", ns, threads, |n| stokes_level(method, n))
}

/// Weak boundary condition method whose parameter may be left to the
/// per-mesh default.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeakBcChoice {
    pub name: &'static str,
    pub param: Option<f64>,
    pub rule: weakbc::ThresholdRule,
}

impl WeakBcChoice {
    pub fn resolve(&self, mesh: &Mesh<f64>) -> Result<WeakBcMethod> {
        let param = match self.param {
            Some(p) => p,
            None => {
                let (gamma, alpha) = weakbc::parameters(mesh, self.rule)?;
                if self.name == "nitsche" {
                    gamma
                } else {
                    alpha
                }
            }
        };
        WeakBcMethod::parse(self.name, param)
    }
}

pub fn weakbc_level(choice: WeakBcChoice, options: WeakBcOptions, n: usize) -> LevelResult {
    let mesh = Mesh::unit_square(n)?;
    let mms = WeakBcManufactured;
    let method = choice.resolve(&mesh)?;
    let sol = weakbc::build(method, &mesh, |x| mms.f(x), |x| mms.d(x), options)?.solve()?;
    let (l2, h1) = weakbc::errors(&mesh, &sol.u, |x| mms.u(x), |x| mms.grad(x));
    Ok((mesh.h(), vec![("err_u_l2".into(), l2), ("err_u_h1".into(), h1)]))
}

pub fn weakbc_convergence(
    choice: WeakBcChoice,
    options: WeakBcOptions,
    ns: &[usize],
    threads: usize,
) -> Result<ConvergenceReport> {
    run_convergence(choice.name, "weakbc-mms", ns, threads, |n| weakbc_level(choice, options, n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn exact_power_laws() {
        assert!((fit_slope(&[1.0, 0.5], &[1.0, 0.5]).unwrap() - 1.0).abs() < 1e-15);
        assert!((fit_slope(&[1.0, 0.5, 0.25], &[4.0, 1.0, 0.25]).unwrap() - 2.0).abs() < 1e-12);
        let hs = [0.125, 0.0625, 0.03125, 0.015625];
        let es: Vec<f64> = hs.iter().map(|h| 3.7 * h * h).collect();
        assert!((fit_slope(&hs, &es).unwrap() - 2.0).abs() < 1e-10);
        assert!(fit_slope(&hs, &[2.0; 4]).unwrap().abs() < 1e-12);
    }

    #[test]
    fn degenerate_fits() {
        assert_eq!(fit_slope(&[0.5], &[1.0]), Err(Error::DegenerateFit(1)));
        assert!(fit_slope(&[1.0, 0.5], &[1.0, 0.0]).is_err());
        assert!(fit_slope(&[0.5, 0.5], &[1.0, 2.0]).is_err());
        assert!(matches!(fit_slope(&[1.0], &[1.0, 2.0]), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn noisy_quadratic_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let hs = [0.125, 0.0625, 0.03125];
        for _ in 0..200 {
            let es: Vec<f64> = hs.iter().map(|h| h * h * (1.0 + rng.gen_range(-0.05..0.05))).collect();
            let s = fit_slope(&hs, &es).unwrap();
            assert!((1.85..=2.15).contains(&s), "{s}");
        }
    }

    fn synthetic(n: usize) -> LevelResult {
        let h = 1.0 / n as f64;
        Ok((h, vec![("a".into(), h * h), ("b".into(), 5.0)]))
    }

    #[test]
    fn report_sorts_levels_and_fits() {
        let r = run_convergence("m", "p", &[16, 4, 8], 2, synthetic).unwrap();
        let hs: Vec<f64> = r.levels.iter().map(|l| l.h).collect();
        assert_eq!(hs, vec![0.25, 0.125, 0.0625]);
        assert!((r.slope("a").unwrap() - 2.0).abs() < 1e-10);
        assert!(r.slope("b").unwrap().abs() < 1e-12);
        assert_eq!(r.error_names(), vec!["a".to_string(), "b".to_string()]);
    }

    #[test]
    fn failed_level_suppresses_slopes() {
        let r = run_convergence("m", "p", &[4, 8, 16, 32], 1, |n| {
            if n == 8 {
                Err(Error::SingularMatrix { step: 0, pivot: 0.0 })
            } else {
                synthetic(n)
            }
        })
        .unwrap();
        assert_eq!(r.levels.len(), 3);
        assert_eq!(r.failures.len(), 1);
        assert!(r.slopes.is_empty());
        assert!(run_convergence("m", "p", &[4, 8], 1, synthetic).is_err());
    }

    #[test]
    fn par_map_keeps_order() {
        let items: Vec<usize> = (0..17).collect();
        for t in [1, 2, 5, 40] {
            assert_eq!(par_map(&items, t, |x| x * x), items.iter().map(|x| x * x).collect::<Vec<_>>());
        }
        assert!(par_map(&Vec::<usize>::new(), 3, |x| *x).is_empty());
    }
}
