use std::process::ExitCode;

use serde_json::{json, Value};

use infsup_lab_core::criteria::{self, CriterionOutcome};
use infsup_lab_core::fespace::FeSpace;
use infsup_lab_core::infsup::{mode_alternation, pair_report, ElementPair, NormMode};
use infsup_lab_core::io::{self, envelope, fmt_float, num, nums, Field};
use infsup_lab_core::locking::{self, Loads, LockingConfig, LockingMethod, MultiplierSpace, ProjectionMass};
use infsup_lab_core::mesh::Mesh;
use infsup_lab_core::stokes::{self, Manufactured, StokesMethod};
use infsup_lab_core::verify::{self, par_map, ConvergenceReport, WeakBcChoice};
use infsup_lab_core::weakbc::{self, NitschePenalty, ThresholdRule, TraceSpace, WeakBcManufactured, WeakBcMethod, WeakBcOptions};
use infsup_lab_core::Error;

use super::*;
use crate::output::{write, write_json};

type Outcome = Result<ExitCode, Failure>;

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure::Usage(e.to_string())
}

fn is_singular(e: &Error) -> bool {
    matches!(e, Error::SingularMatrix { .. })
}

pub(crate) fn stokes(a: StokesArgs) -> Outcome {
    let method = StokesMethod::parse(&a.method, a.eps).map_err(usage)?;
    let mesh = Mesh::unit_square(a.n)?;
    let config = json!({"subcommand": "stokes", "method": method.name(), "n": a.n, "eps": num(a.eps)});
    let exact = Manufactured;
    let problem = stokes::build(method, &mesh, &|x| exact.force(x))?;
    let sol = match problem.solve() {
        Ok(s) => s,
        Err(e) if is_singular(&e) => {
            println!("{method} n={}: {e}", a.n);
            let record = envelope(config, json!({"error": e.to_string()}), "singular");
            write_json(a.out.json.as_deref(), &record)?;
            // expected for the unstabilized equal-order pair
            return Ok(if method == StokesMethod::P1P1Plain { ExitCode::SUCCESS } else { ExitCode::from(1) });
        }
        Err(e) => return Err(e.into()),
    };
    let e = problem.errors(&sol, &exact);
    let h = mesh.h();
    println!("{method} n={} h={h:.6}", a.n);
    println!("  err_u_l2 {:.6e}  err_u_h1 {:.6e}  err_p_l2 {:.6e}", e.err_u_l2, e.err_u_h1, e.err_p_l2);
    println!("  residual {:.2e}", sol.residual_norm);
    let results = json!({
        "h": num(h),
        "n_u": problem.velocity.n_dofs(),
        "n_p": problem.pressure.n_dofs(),
        "err_u_l2": num(e.err_u_l2),
        "err_u_h1": num(e.err_u_h1),
        "err_p_l2": num(e.err_p_l2),
        "residual_norm": num(sol.residual_norm),
        "pressure_mean": num(problem.pressure_mean(&sol)),
        "oscillation": num(stokes::oscillation_indicator(&problem.pressure, &sol.p)),
    });
    write_json(a.out.json.as_deref(), &envelope(config, results, "ok"))?;
    if let Some(p) = &a.out.csv {
        write(p, &io::stokes_errors_csv(&[(h, [e.err_u_l2, e.err_u_h1, e.err_p_l2])]))?;
    }
    if let Some(p) = &a.vtk {
        let (points, cells) = io::flow_fields(&problem.velocity, &sol.u, &problem.pressure, &sol.p);
        write(p, &io::vtk(&mesh, &format!("stokes {method} n={}", a.n), &points, &cells)?)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn weak_options(w: &WeakOptions) -> WeakBcOptions {
    WeakBcOptions {
        trace: match w.trace {
            Trace::P1 => TraceSpace::P1,
            Trace::P0 => TraceSpace::P0,
        },
        penalty: match w.penalty {
            Penalty::Full => NitschePenalty::Full,
            Penalty::Projected => NitschePenalty::Projected,
        },
    }
}

fn rule(w: &WeakOptions) -> ThresholdRule {
    match w.rule {
        Rule::Squared => ThresholdRule::Squared,
        Rule::Linear => ThresholdRule::Linear,
    }
}

fn weak_choice(name: &str, w: &WeakOptions) -> Result<WeakBcChoice, Failure> {
    let name = WeakBcMethod::NAMES
        .into_iter()
        .find(|&n| n == name)
        .ok_or_else(|| usage(format!("unknown weak boundary method '{name}' (expected {})", WeakBcMethod::NAMES.join(", "))))?;
    let param = match name {
        "nitsche" => w.gamma,
        "bh" => w.alpha,
        _ => None,
    };
    Ok(WeakBcChoice {
        name,
        param,
        rule: rule(w),
    })
}

fn weak_config(w: &WeakOptions) -> Value {
    json!({
        "gamma": w.gamma.map(num),
        "alpha": w.alpha.map(num),
        "rule": format!("{:?}", w.rule).to_lowercase(),
        "trace": format!("{:?}", w.trace).to_lowercase(),
        "penalty": format!("{:?}", w.penalty).to_lowercase(),
    })
}

fn print_report(r: &ConvergenceReport) {
    let names = r.error_names();
    println!("{} ({})", r.method, r.problem);
    println!("  {:>4} {:>12} {}", "n", "h", names.iter().map(|k| format!("{k:>14}")).collect::<String>());
    for l in &r.levels {
        let errs: String = names.iter().map(|k| format!("{:>14.6e}", l.error(k).unwrap_or(f64::NAN))).collect();
        println!("  {:>4} {:>12.6} {errs}", l.n, l.h);
    }
    for (k, s) in &r.slopes {
        println!("  slope {k}: {s:.4}");
    }
    for (n, e) in &r.failures {
        println!("  n={n} failed: {e}");
    }
}

pub(crate) fn convergence(a: ConvergenceArgs, threads: usize) -> Outcome {
    if a.levels.len() < 3 {
        return Err(usage(format!("--levels needs at least 3 mesh sizes, got {}", a.levels.len())));
    }
    let (report, plain, config) = match a.family {
        Family::Stokes => {
            let method = StokesMethod::parse(&a.method, a.eps).map_err(usage)?;
            let config = json!({
                "subcommand": "convergence", "family": "stokes", "method": method.name(),
                "levels": a.levels, "eps": num(a.eps),
            });
            (verify::stokes_convergence(method, &a.levels, threads)?, method == StokesMethod::P1P1Plain, config)
        }
        Family::Weakbc => {
            let choice = weak_choice(&a.method, &a.weak)?;
            let config = json!({
                "subcommand": "convergence", "family": "weakbc", "method": choice.name,
                "levels": a.levels, "weak": weak_config(&a.weak),
            });
            (verify::weakbc_convergence(choice, weak_options(&a.weak), &a.levels, threads)?, false, config)
        }
    };
    print_report(&report);
    let all_singular = !report.failures.is_empty() && report.failures.iter().all(|(_, e)| is_singular(e));
    let (status, code) = if report.failures.is_empty() {
        ("ok", ExitCode::SUCCESS)
    } else if plain && all_singular {
        ("singular", ExitCode::SUCCESS)
    } else {
        ("failed", ExitCode::from(1))
    };
    write_json(a.out.json.as_deref(), &envelope(config, io::convergence_json(&report), status))?;
    if let Some(p) = &a.out.csv {
        write(p, &io::convergence_csv(&report))?;
    }
    Ok(code)
}

pub(crate) fn infsup(a: InfsupArgs) -> Outcome {
    let pair: ElementPair = a.pair.parse().map_err(usage)?;
    let mode = match a.mode {
        Mode::Euclidean => NormMode::Euclidean,
        Mode::Weighted => NormMode::Weighted,
    };
    let report = pair_report::<f64>(pair, a.n, mode)?;
    let alternation = mode_alternation(pair, a.n, &report)?;
    let constant_angle = report.kernel_angle(&vec![1.0; report.n_pressure()]);
    println!("{pair} n={} {mode}: beta = {:.6e}", a.n, report.beta);
    println!(
        "  rank {} of {} pressure dofs, kernel dimension {}, mode alternation {alternation:.3}",
        report.numerical_rank,
        report.n_pressure(),
        report.kernel_dim_pressure
    );
    let config = json!({"subcommand": "infsup", "pair": pair.name(), "n": a.n, "mode": mode.name()});
    let results = json!({
        "beta": num(report.beta),
        "h": num(report.h),
        "numerical_rank": report.numerical_rank,
        "rank_tol": num(report.rank_tol),
        "kernel_dim_pressure": report.kernel_dim_pressure,
        "constant_kernel_angle": num(constant_angle),
        "alternation": num(alternation),
        "sigma": nums(&report.sigma),
        "worst_pressure_mode": nums(&report.worst_pressure_mode),
    });
    write_json(a.out.json.as_deref(), &envelope(config, results, "ok"))?;
    if let Some(p) = &a.out.csv {
        write(p, &io::spectrum_csv(&report.sigma))?;
    }
    if let Some(p) = &a.vtk {
        let mesh = Mesh::unit_square(a.n)?;
        let space = FeSpace::scalar(&mesh, pair.elements().1);
        let mode_field = &report.worst_pressure_mode;
        let (points, cells) = if space.kind().is_continuous() {
            (vec![Field::Scalar("pressure_mode".into(), io::vertex_values(&space, mode_field, 0))], vec![])
        } else {
            (vec![], vec![Field::Scalar("pressure_mode".into(), io::cell_values(&space, mode_field))])
        };
        write(p, &io::vtk(&mesh, &format!("infsup {pair} n={}", a.n), &points, &cells)?)?;
    }
    Ok(ExitCode::SUCCESS)
}

pub(crate) fn locking(a: LockingArgs, threads: usize) -> Outcome {
    let method: LockingMethod = a.method.parse().map_err(usage)?;
    if a.lambdas.is_empty() {
        return Err(usage("--lambdas needs at least one value"));
    }
    if method == LockingMethod::Multiplier && a.lambdas.contains(&0.0) {
        return Err(usage("the multiplier method needs lambda > 0"));
    }
    let &[fx, fy] = a.f.as_slice() else {
        return Err(usage(format!("--f takes two values fx,fy, got {}", a.f.len())));
    };
    let g = a.g;
    let mut config = LockingConfig::new(method, a.lambdas[0], a.n).with_loads(Loads::new(move |_| [fx, fy], move |_| g));
    if let Some(c) = a.c_omega {
        config.poincare_const = c;
    }
    config.projection = match a.projection {
        Projection::Consistent => ProjectionMass::Consistent,
        Projection::Lumped => ProjectionMass::Lumped,
    };
    config.multiplier_space = match a.multiplier_space {
        GammaSpace::Broken => MultiplierSpace::Broken,
        GammaSpace::Continuous => MultiplierSpace::Continuous,
    };
    config.augmented = a.augmented;
    let reports = par_map(&a.lambdas, threads, |&l| locking::run(&config.clone().with_lambda(l)));
    let reports: Vec<_> = reports.into_iter().collect::<Result<_, _>>()?;
    println!("{method} n={} f=({fx}, {fy}) g={g}", a.n);
    println!("  {:>12} {:>16} {:>16}  status", "lambda", "|u|_H1", "|p|_H1");
    let mut rows = Vec::new();
    let mut table = Vec::new();
    for r in &reports {
        let status = if r.solve_ok { "ok" } else { "singular" };
        println!("  {:>12.4e} {:>16.8e} {:>16.8e}  {status}", r.lambda, r.u_h1_norm, r.p_h1_norm);
        rows.push(json!({
            "lambda": num(r.lambda),
            "u_h1": num(r.u_h1_norm),
            "p_h1": num(r.p_h1_norm),
            "status": status,
            "error": r.error,
        }));
        table.push(vec![fmt_float(r.lambda), fmt_float(r.u_h1_norm), fmt_float(r.p_h1_norm), status.to_string()]);
    }
    let status = if reports.iter().all(|r| r.solve_ok) { "ok" } else { "singular" };
    let config_json = json!({
        "subcommand": "locking", "method": method.name(), "n": a.n,
        "lambdas": nums(&a.lambdas), "c_omega": num(config.poincare_const),
        "projection": format!("{:?}", a.projection).to_lowercase(),
        "multiplier_space": format!("{:?}", a.multiplier_space).to_lowercase(),
        "augmented": a.augmented, "f": nums(&a.f), "g": num(a.g),
    });
    write_json(a.out.json.as_deref(), &envelope(config_json, Value::Array(rows), status))?;
    if let Some(p) = &a.out.csv {
        write(p, &io::csv(&["lambda", "u_h1", "p_h1", "status"], &table))?;
    }
    Ok(ExitCode::SUCCESS)
}

pub(crate) fn weakbc(a: WeakbcArgs) -> Outcome {
    let choice = weak_choice(&a.method, &a.weak)?;
    let mesh = Mesh::unit_square(a.n)?;
    let method = choice.resolve(&mesh)?;
    let options = weak_options(&a.weak);
    let mms = WeakBcManufactured;
    let c_i = weakbc::inverse_constant(&mesh)?;
    let sol = weakbc::build(method, &mesh, |x| mms.f(x), |x| mms.d(x), options)?.solve()?;
    let (l2, h1) = weakbc::errors(&mesh, &sol.u, |x| mms.u(x), |x| mms.grad(x));
    println!("{method} n={} C_i={c_i:.6}", a.n);
    println!("  err_u_l2 {l2:.6e}  err_u_h1 {h1:.6e}  residual {:.2e}", sol.residual_norm);
    let mut results = json!({
        "h": num(mesh.h()),
        "inverse_constant": num(c_i),
        "parameter": match method {
            WeakBcMethod::Nitsche(p) | WeakBcMethod::BarbosaHughes(p) => num(p),
            WeakBcMethod::Multiplier => Value::Null,
        },
        "err_u_l2": num(l2),
        "err_u_h1": num(h1),
        "residual_norm": num(sol.residual_norm),
    });
    if let Some(lam) = &sol.lambda {
        results["lambda"] = nums(lam);
        if options.trace == TraceSpace::P1 {
            let r = weakbc::lambda_roughness(&mesh, lam);
            println!("  multiplier roughness {r:.4}");
            results["lambda_roughness"] = num(r);
        }
    }
    if a.equivalence {
        let alpha = match a.weak.alpha {
            Some(x) => x,
            None => weakbc::parameters(&mesh, rule(&a.weak))?.1,
        };
        let e = weakbc::equivalence_check(&mesh, alpha, |x| mms.f(x), |x| mms.d(x))?;
        println!("  equivalence at alpha={alpha:.6}: projected {:.3e}, full penalty {:.3e}", e.projected, e.full);
        results["equivalence"] = json!({"alpha": num(alpha), "projected": num(e.projected), "full": num(e.full)});
    }
    let config = json!({"subcommand": "weakbc", "method": choice.name, "n": a.n, "weak": weak_config(&a.weak), "equivalence": a.equivalence});
    write_json(a.out.json.as_deref(), &envelope(config, results, "ok"))?;
    if let Some(p) = &a.out.csv {
        write(p, &io::csv(&["h", "err_u_l2", "err_u_h1"], &[vec![fmt_float(mesh.h()), fmt_float(l2), fmt_float(h1)]]))?;
    }
    if let Some(p) = &a.vtk {
        write(p, &io::vtk(&mesh, &format!("weakbc {method} n={}", a.n), &[Field::Scalar("u".into(), sol.u.clone())], &[])?)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn outcome_json(o: &CriterionOutcome) -> Value {
    json!({"id": o.id, "title": o.title(), "passed": o.passed, "detail": o.detail, "notes": o.notes})
}

pub(crate) fn selftest(a: SelftestArgs, threads: usize) -> Outcome {
    let mut ids: Vec<usize> = if a.only.is_empty() {
        criteria::IDS.collect()
    } else {
        a.only.iter().map(|&i| i as usize).collect()
    };
    ids.sort_unstable();
    ids.dedup();
    let outcomes = criteria::evaluate_all(&ids, threads, a.seed);
    for o in &outcomes {
        println!("{o}");
    }
    let passed = outcomes.iter().filter(|o| o.passed).count();
    println!("{passed}/{} criteria passed", outcomes.len());
    let status = if passed == outcomes.len() { "ok" } else { "failed" };
    let config = json!({"subcommand": "selftest", "criteria": ids, "seed": a.seed});
    let results = Value::Array(outcomes.iter().map(outcome_json).collect());
    write_json(a.json.as_deref(), &envelope(config, results, status))?;
    Ok(if status == "ok" { ExitCode::SUCCESS } else { ExitCode::from(1) })
}
