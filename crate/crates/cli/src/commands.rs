//! One function per subcommand. Each returns the artifacts it wrote and a
//! summary object for the manifest.

use std::fmt::Write as _;
use std::path::Path;

use geomilne::decomposition::decompose;
use geomilne::expansion::{build_expansion, LayerFamily};
use geomilne::milne::{flux_profile, MilneSolution};
use geomilne::norms::convergence_study;
use geomilne::transport2d::{solve_transport, TransportProblem};
use geomilne::verify;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::CliError;

pub struct Outcome {
    pub files: Vec<String>,
    pub summary: Value,
}

/// Fixed 17-significant-digit rendering.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn write(dir: &Path, name: &str, body: &str, files: &mut Vec<String>) -> Result<(), CliError> {
    std::fs::write(dir.join(name), body)?;
    files.push(name.to_string());
    Ok(())
}

fn write_json(dir: &Path, name: &str, v: &Value, files: &mut Vec<String>) -> Result<(), CliError> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    write(dir, name, &s, files)
}

fn milne_csv(sol: &MilneSolution) -> String {
    let mut s = String::from("eta,phi,f\n");
    for (i, &e) in sol.eta.nodes().iter().enumerate() {
        for (j, &p) in sol.phi.nodes().iter().enumerate() {
            let _ = writeln!(s, "{},{},{}", num(e), num(p), num(sol.value(i, j)));
        }
    }
    s
}

pub fn milne(cfg: &RunConfig, dir: &Path, flat: bool) -> Result<Outcome, CliError> {
    let eps = cfg.epsilons[0];
    let boundary = cfg.boundary()?;
    let mut ctx = cfg.milne_context(eps);
    if flat {
        ctx.geometric_correction = false;
    }
    let tau = 0.0;
    let r_kappa = boundary.radius_of_curvature_at_tau(tau);
    let op = ctx.operator(r_kappa)?;
    let g = cfg.datum();
    let sol = ctx.solve(&op, &g.at_tau(tau), None)?;
    let flux = flux_profile(&sol).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let meta = json!({
        "epsilon": eps,
        "R_kappa": r_kappa,
        "L": sol.eta.length(),
        "f_L": sol.f_l,
        "iterations": sol.iterations,
        "residual": sol.residual,
        "tau": tau,
        "geometric_correction": ctx.geometric_correction,
        "max_abs_flux": flux,
    });
    let mut files = Vec::new();
    write(dir, "milne_solution.csv", &milne_csv(&sol), &mut files)?;
    write_json(dir, "milne_meta.json", &meta, &mut files)?;
    Ok(Outcome { files, summary: meta })
}

pub fn decompose_cmd(cfg: &RunConfig, dir: &Path) -> Result<Outcome, CliError> {
    let eps = cfg.epsilons[0];
    let ctx = cfg.milne_context(eps);
    let dec = decompose(&cfg.datum(), &cfg.boundary()?, &ctx, cfg.decomposition.alpha, cfg.decomposition.n_tau)?;
    let (_, phi) = ctx.grids.grids(&ctx.problem(1.0)?)?;
    let mut s = String::from("tau,phi,g,g_flat,g_sharp\n");
    for (k, sample) in dec.samples.iter().enumerate() {
        for &p in phi.nodes().iter().filter(|p| p.sin() > 0.0) {
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                num(sample.tau),
                num(p),
                num(dec.g(k, p)),
                num(dec.g_flat(k, p)),
                num(dec.g_sharp(k, p))
            );
        }
    }
    let mut files = Vec::new();
    write(dir, "decomposition.csv", &s, &mut files)?;
    let summary = json!({
        "epsilon": eps,
        "alpha": cfg.decomposition.alpha,
        "delta": eps.powf(cfg.decomposition.alpha),
        "lambda": dec.lambdas(),
    });
    Ok(Outcome { files, summary })
}

fn family_meta(f: &LayerFamily) -> Value {
    json!({
        "order": f.order,
        "kind": format!("{:?}", f.kind).to_lowercase(),
        "f_L": f.far_field(),
        "sup_norm": f.sup_norm(),
    })
}

pub fn expand(cfg: &RunConfig, dir: &Path, layers: bool) -> Result<Outcome, CliError> {
    let eps = cfg.epsilons[0];
    let boundary = cfg.boundary()?;
    let ctx = cfg.milne_context(eps);
    let e = build_expansion(&cfg.datum(), &boundary, &ctx, &cfg.expansion())?;
    let trace_sup = |u: &geomilne::expansion::HarmonicField| u.trace().map_or(0.0, |t| t.sup_norm());
    let meta = json!({
        "epsilon": eps,
        "taus": e.ub0.taus,
        "lambda": e.decomposed.lambdas(),
        "UB0": family_meta(&e.ub0),
        "UF0": family_meta(&e.uf0),
        "UB1": family_meta(&e.ub1),
        "U0_trace_sup": trace_sup(&e.u0),
        "U1_trace_sup": trace_sup(&e.u1),
        "U2_trace_sup": trace_sup(&e.u2),
        "U0_boundary_misfit": e.u0.boundary_misfit,
        "U1_boundary_misfit": e.u1.boundary_misfit,
        "poisson_sources": e.poisson_sources,
        "harmonicity": e.harmonicity(1e-3),
        "matching_error": e.matching_error(),
    });
    let mut files = Vec::new();
    write_json(dir, "expansion_meta.json", &meta, &mut files)?;
    if layers {
        for (k, sol) in e.ub0.solutions.iter().enumerate() {
            write(dir, &format!("layer_{k}.csv"), &milne_csv(sol), &mut files)?;
        }
    }
    Ok(Outcome { files, summary: meta })
}

pub fn transport(cfg: &RunConfig, dir: &Path) -> Result<Outcome, CliError> {
    let eps = cfg.epsilons[0];
    let boundary = cfg.boundary()?;
    let problem = TransportProblem::new(boundary, eps, cfg.datum());
    let grids = cfg.transport_grids(eps)?;
    let (sol, u) = solve_transport(&problem, &grids, &cfg.transport())?;
    let mut s = String::from("x1,x2,psi,u\n");
    let m = grids.ordinates.len();
    for (i, x) in grids.mesh.nodes().iter().enumerate() {
        for j in 0..m {
            let _ = writeln!(
                s,
                "{},{},{},{}",
                num(x.x),
                num(x.y),
                num(grids.ordinates.angles()[j]),
                num(u.value(i, j))
            );
        }
    }
    let meta = json!({
        "epsilon": eps,
        "method": sol.method,
        "n_nodes": grids.mesh.len(),
        "n_ordinates": m,
        "iterations": sol.iterations,
        "residual": sol.residual,
        "u_sup": u.sup_norm(),
        "u_bar_min": sol.mean.iter().cloned().fold(f64::INFINITY, f64::min),
        "u_bar_max": sol.mean.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    });
    let mut files = Vec::new();
    write(dir, "transport_field.csv", &s, &mut files)?;
    write_json(dir, "transport_meta.json", &meta, &mut files)?;
    Ok(Outcome { files, summary: meta })
}

pub fn limit_study(cfg: &RunConfig, dir: &Path) -> Result<Outcome, CliError> {
    let study = convergence_study(&cfg.limit_study()?)?;
    let col = |f: fn(&geomilne::norms::LimitRow) -> f64| study.rows.iter().map(f).collect::<Vec<f64>>();
    let out = json!({
        "epsilons": col(|r| r.epsilon),
        "r0_sup": col(|r| r.r0_sup),
        "r0_l2": col(|r| r.r0_l2),
        "fitted_order": study.fitted_order,
        "components": {
            "r0_sup_excluding_grazing": col(|r| r.r0_sup_excluding_grazing),
            "r_sup": col(|r| r.r_sup),
            "r_l2": col(|r| r.r_l2),
            "u_sup": col(|r| r.u_sup),
            "ub0_sup": col(|r| r.ub0_sup),
            "uf0_sup": col(|r| r.uf0_sup),
            "ub1_sup": col(|r| r.ub1_sup),
            "matching_error": col(|r| r.matching_error),
            "self_convergence_ratio": col(|r| r.self_convergence_ratio),
            "fitted_order_excluding_grazing": study.fitted_order_excluding_grazing,
            "fitted_order_l2": study.fitted_order_l2,
            "strictly_decreasing": study.strictly_decreasing(),
        },
    });
    let mut csv = String::from(
        "epsilon,r0_sup,r0_sup_excluding_grazing,r0_l2,r_sup,r_l2,u_sup,ub0_sup,uf0_sup,ub1_sup,self_convergence_ratio\n",
    );
    for r in &study.rows {
        let vals = [
            r.epsilon,
            r.r0_sup,
            r.r0_sup_excluding_grazing,
            r.r0_l2,
            r.r_sup,
            r.r_l2,
            r.u_sup,
            r.ub0_sup,
            r.uf0_sup,
            r.ub1_sup,
            r.self_convergence_ratio,
        ];
        let line: Vec<String> = vals.iter().map(|v| num(*v)).collect();
        csv.push_str(&line.join(","));
        csv.push('\n');
    }
    let mut files = Vec::new();
    write_json(dir, "limit_study.json", &out, &mut files)?;
    write(dir, "limit_study.csv", &csv, &mut files)?;
    Ok(Outcome {
        files,
        summary: json!({ "fitted_order": study.fitted_order }),
    })
}

pub fn verify_cmd(dir: &Path, only: &[u8]) -> Result<(Outcome, bool), CliError> {
    let outcomes = verify::run(only);
    for o in &outcomes {
        println!("{}", o.line());
    }
    let all = outcomes.iter().all(|o| o.passed);
    let v = json!({
        "criteria": outcomes,
        "passed": outcomes.iter().filter(|o| o.passed).count(),
        "total": outcomes.len(),
    });
    let mut files = Vec::new();
    write_json(dir, "verify.json", &v, &mut files)?;
    let summary = json!({ "passed": v["passed"], "total": v["total"] });
    Ok((Outcome { files, summary }, all))
}
