//! The acceptance suite: ten end-to-end checks, each reporting a measured
//! value against its tolerance.

use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::decomposition::{decompose, BoundaryDatum};
use crate::discretization::Ordinates;
use crate::error::Result;
use crate::expansion::{build_expansion, ExpansionConfig};
use crate::geometry::{ConvexBoundary, Vec2};
use crate::milne::{
    adaptive_simpson, fit_decay_amplitude, flux, flux_profile, grazing_eta_derivative_sup, inflow_range,
    MeanInterpolation, MilneContext, MilneGridSpec,
};
use crate::norms::{
    apriori_check, assemble_remainder, boundary_norm, convergence_study, ratio_spread, BoundarySide, BoundaryTrace,
    DataNorms, LimitStudyConfig, DEFAULT_K0, DEFAULT_M,
};
use crate::transport2d::{exit_time, solve_transport, SourceFn, TransportConfig, TransportGrids, TransportProblem};

/// Pinned reference values, regenerated by criterion 10.
pub mod golden {
    /// Far-field value for `h = 1 + sin(phi)/2`, `eps = 0.1`, `R = 1`.
    pub const F_L: f64 = 1.414_592;
    pub const F_L_TOL: f64 = 1e-5;
    /// Decomposition weight for `g = 1 + sin(phi)/2` on the unit disk at
    /// `eps = 0.1`, `alpha = 1/2`.
    pub const LAMBDA: f64 = 0.167_04;
    pub const LAMBDA_TOL: f64 = 1e-3;
    pub const GAMMA_MINUS_UNIT: f64 = 3.544_907_701_811_032; // 2 sqrt(pi)
    pub const GAMMA_MINUS_TOL: f64 = 1e-3;
    pub const EXIT_TIME_TOL: f64 = 1e-10;
}

#[derive(Debug, Clone, Serialize)]
pub struct CriterionOutcome {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
    pub budget_seconds: Option<f64>,
}

impl CriterionOutcome {
    pub fn line(&self) -> String {
        format!(
            "[{}] {:>2} {:<32} {} ({:.1} s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.detail,
            self.seconds
        )
    }
}

struct Check {
    passed: bool,
    detail: String,
}

fn check(passed: bool, detail: String) -> Result<Check> {
    Ok(Check { passed, detail })
}

pub const CRITERIA: [(u8, &str, Option<f64>); 10] = [
    (1, "constant-data exactness", Some(10.0)),
    (2, "Milne maximum principle", Some(60.0)),
    (3, "flux orthogonality", None),
    (4, "exponential decay", None),
    (5, "grazing regularity contrast", Some(120.0)),
    (6, "decomposition guarantees", None),
    (7, "interior reduction", None),
    (8, "diffusive limit study", Some(600.0)),
    (9, "a-priori ratio stability", None),
    (10, "oracle equivalence", None),
];

/// Runs the selected criteria (all when `ids` is empty), in order.
pub fn run(ids: &[u8]) -> Vec<CriterionOutcome> {
    CRITERIA
        .iter()
        .filter(|(id, _, _)| ids.is_empty() || ids.contains(id))
        .map(|&(id, name, budget)| {
            let t0 = Instant::now();
            let res = match id {
                1 => constant_data(),
                2 => maximum_principle(),
                3 => flux_orthogonality(),
                4 => exponential_decay(),
                5 => grazing_contrast(),
                6 => decomposition_guarantees(),
                7 => interior_reduction(),
                8 => diffusive_limit(),
                9 => apriori_stability(),
                _ => oracle_equivalence(),
            };
            let seconds = t0.elapsed().as_secs_f64();
            let (mut passed, mut detail) = match res {
                Ok(c) => (c.passed, c.detail),
                Err(e) => (false, format!("error: {e}")),
            };
            if let Some(b) = budget {
                if seconds > b {
                    passed = false;
                    detail.push_str(&format!("; over the {b:.0} s budget"));
                }
            }
            CriterionOutcome {
                id,
                name,
                passed,
                detail,
                seconds,
                budget_seconds: budget,
            }
        })
        .collect()
}

fn milne_ctx(eps: f64, n_eta: usize, n_phi: usize, interpolation: MeanInterpolation) -> MilneContext {
    let mut ctx = MilneContext::new(
        eps,
        MilneGridSpec {
            n_eta,
            n_phi,
            ..Default::default()
        },
    );
    ctx.interpolation = interpolation;
    ctx
}

fn half_sine() -> BoundaryDatum {
    BoundaryDatum::new(|_, p| 1.0 + 0.5 * p.sin())
}

fn constant_data() -> Result<Check> {
    let b = ConvexBoundary::unit_disk();
    let eps = 0.1;
    let g = BoundaryDatum::constant(1.0);
    let problem = TransportProblem::new(b.clone(), eps, g.clone());
    let grids = TransportGrids::new(&b, eps, 8, 32)?;
    let (_, u) = solve_transport(&problem, &grids, &TransportConfig::default())?;
    let u_err = u.values.iter().fold(0.0f64, |m, v| m.max((v - 1.0).abs()));
    let ctx = MilneContext::new(eps, MilneGridSpec::default());
    let e = build_expansion(&g, &b, &ctx, &ExpansionConfig::default())?;
    let layers = e.ub0.sup_norm().max(e.ub1.sup_norm()).max(e.uf0.sup_norm());
    let rem = assemble_remainder(&u, &grids.mesh, &grids.ordinates, &e);
    let r = rem.r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    check(
        u_err <= 1e-10 && layers <= 1e-10 && r <= 1e-9,
        format!("|u-1| = {u_err:.2e}, layers = {layers:.2e}, |R| = {r:.2e}"),
    )
}

/// Random trigonometric polynomial of degree 3 with decaying coefficients.
fn random_inflow(rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..7).map(|k| rng.gen_range(-1.0..1.0) / (1 + k / 2) as f64).collect()
}

fn trig(c: &[f64], p: f64) -> f64 {
    let mut v = c[0];
    for k in 1..=3 {
        v += c[2 * k - 1] * (k as f64 * p).cos() + c[2 * k] * (k as f64 * p).sin();
    }
    v
}

fn maximum_principle() -> Result<Check> {
    let ctx = milne_ctx(0.1, 65, 64, MeanInterpolation::Linear);
    let op = ctx.operator(1.0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(20_241_014);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..20 {
        let c = random_inflow(&mut rng);
        let h = |p: f64| trig(&c, p);
        let (lo, hi) = inflow_range(&h, 4096);
        let sol = ctx.solve(&op, &h, None)?;
        let over = sol
            .values
            .iter()
            .map(|v| (lo - v).max(v - hi))
            .fold(f64::NEG_INFINITY, f64::max);
        worst = worst.max(over);
    }
    check(
        worst <= 1e-6,
        format!("20 random data, worst excursion beyond [min h, max h] = {worst:.2e}"),
    )
}

fn flux_orthogonality() -> Result<Check> {
    let ctx = milne_ctx(0.1, 129, 128, MeanInterpolation::Cubic);
    let (eps, r) = (ctx.epsilon, 1.0);
    let op = ctx.operator(r)?;
    let sol = ctx.solve(&op, &|p: f64| 1.0 + 0.5 * p.sin(), None)?;
    let free = flux_profile(&sol).iter().fold(0.0f64, |m, v| m.max(v.abs()));

    // S = S_Q(eta) (1 + 0.3 cos phi): only its angular mean drives the flux.
    let s_q = |e: f64| (-e).exp();
    let mut source = Vec::with_capacity(op.n_nodes());
    for &e in op.eta().nodes() {
        for &p in op.phi().nodes() {
            source.push(s_q(e) * (1.0 + 0.3 * p.cos()));
        }
    }
    let forced = ctx.solve(&op, &|p: f64| 1.0 + 0.5 * p.sin(), Some(&source))?;
    let l = forced.eta.length();
    let mut err = 0.0f64;
    for (i, &e) in forced.eta.nodes().iter().enumerate() {
        let exact = -2.0 * PI * adaptive_simpson(&|y: f64| (r - eps * y) / (r - eps * e) * s_q(y), e, l, 1e-13);
        err = err.max((flux(&forced, i) - exact).abs());
    }
    check(
        free <= 1e-6 && err <= 1e-5,
        format!("S = 0 flux = {free:.2e}; forced flux error = {err:.2e}"),
    )
}

fn exponential_decay() -> Result<Check> {
    let ctx = milne_ctx(0.1, 129, 128, MeanInterpolation::Linear);
    let op = ctx.operator(1.0)?;
    let sol = ctx.solve(&op, &|p: f64| 1.0 + 0.5 * p.sin(), None)?;
    let dev = |i: usize| sol.row(i).iter().fold(0.0f64, |m, v| m.max((v - sol.f_l).abs()));
    let amp = dev(0);
    let a = fit_decay_amplitude(&sol, DEFAULT_K0);
    let half = sol.eta.locate(sol.eta.length() / 2.0);
    let at_half = dev(half) / amp;
    check(
        a <= 3.0 * amp && at_half <= 1e-3,
        format!(
            "A / amp = {:.3} (<= 3), deviation at L/2 = {at_half:.2e} of amp (<= 1e-3)",
            a / amp
        ),
    )
}

fn grazing_contrast() -> Result<Check> {
    let h = |p: f64| 1.0 + 0.5 * p.sin();
    let mut flat = [0.0; 2];
    let mut corrected = [0.0; 2];
    for (k, &(ne, np)) in [(65usize, 64usize), (129, 128)].iter().enumerate() {
        let mut ctx = milne_ctx(0.1, ne, np, MeanInterpolation::Linear);
        ctx.geometric_correction = false;
        let s = ctx.solve(&ctx.operator(1.0)?, &h, None)?;
        flat[k] = grazing_eta_derivative_sup(&s, 0.5, 0.3, false);
        ctx.geometric_correction = true;
        let s = ctx.solve(&ctx.operator(1.0)?, &h, None)?;
        corrected[k] = grazing_eta_derivative_sup(&s, 0.5, 0.3, true);
    }
    let growth = flat[1] / flat[0];
    let change = (corrected[1] / corrected[0] - 1.0).abs();
    check(
        growth >= 2.0 && change <= 0.2,
        format!(
            "flat sup|df/deta| growth = {growth:.3} (>= 2), corrected sup|zeta df/deta| change = {:.1}% (<= 20%)",
            100.0 * change
        ),
    )
}

fn decomposition_guarantees() -> Result<Check> {
    let b = ConvexBoundary::unit_disk();
    let ctx = milne_ctx(0.1, 65, 128, MeanInterpolation::Linear);
    let alpha = 0.5;
    let g = half_sine();
    let dec = decompose(&g, &b, &ctx, alpha, 8)?;
    let delta = ctx.epsilon.powf(alpha);
    let mut sum_err = 0.0f64;
    let mut support_ok = true;
    for k in 0..dec.n_tau() {
        for n in 1..4000 {
            let p = PI * n as f64 / 4000.0;
            let (gs, gf) = (dec.g_sharp(k, p), dec.g_flat(k, p));
            sum_err = sum_err.max((gs + gf - dec.g(k, p)).abs());
            if p.sin() >= 2.0 * delta && gs != 0.0 {
                support_ok = false;
            }
        }
    }
    let lambdas = dec.lambdas();
    let lambda_ok = lambdas.iter().all(|l| l.is_some_and(|l| l > 0.0 && l < 1.0));
    let op = ctx.operator(1.0)?;
    let flat = ctx.solve(&op, &|p: f64| dec.g_flat(0, p), None)?;
    let raw = ctx.solve(&op, &|p: f64| dec.g(0, p), None)?;
    let ratio = crate::decomposition::grazing_derivative_ratio(&flat, delta);
    let raw_ratio = crate::decomposition::grazing_derivative_ratio(&raw, delta);
    check(
        sum_err <= 1e-14 && support_ok && lambda_ok && ratio <= 10.0,
        format!(
            "|g_flat + g_sharp - g| = {sum_err:.1e}, support ok = {support_ok}, lambda = {:.5}, grazing ratio = {ratio:.2} (undecomposed {raw_ratio:.0})",
            lambdas[0].unwrap_or(f64::NAN)
        ),
    )
}

fn interior_reduction() -> Result<Check> {
    let b = ConvexBoundary::new(vec![1.0, 0.1])?;
    let ctx = MilneContext::new(0.1, MilneGridSpec::default());
    let g = BoundaryDatum::new(|t, p| 1.0 + 0.5 * p.sin() + 0.2 * t.cos());
    let e = build_expansion(&g, &b, &ctx, &ExpansionConfig::default())?;
    let [p1, p2] = e.poisson_sources;
    let harm = e.harmonicity(1e-3);
    let worst = harm.iter().fold(0.0f64, |m, v| m.max(*v));
    check(
        p1 <= 1e-8 && p2 <= 1e-8 && worst <= 1e-5,
        format!("ellipse: sources = [{p1:.1e}, {p2:.1e}], harmonicity = [{:.1e}, {:.1e}, {:.1e}]", harm[0], harm[1], harm[2]),
    )
}

fn diffusive_limit() -> Result<Check> {
    let cfg = LimitStudyConfig::disk_default(half_sine());
    let study = convergence_study(&cfg)?;
    let order = study.fitted_order;
    let rows: Vec<String> = study
        .rows
        .iter()
        .map(|r| format!("eps {}: {:.3e} (sc {:.2})", r.epsilon, r.r0_sup, r.self_convergence_ratio))
        .collect();
    check(
        study.strictly_decreasing() && (0.3..=1.2).contains(&order),
        format!("|R0|_inf {}; order = {order:.3}", rows.join(", ")),
    )
}

fn apriori_stability() -> Result<Check> {
    let b = ConvexBoundary::unit_disk();
    let h = half_sine();
    let f: SourceFn = Arc::new(|x: Vec2, w: Vec2| 1.0 + 0.5 * x.x + 0.25 * w.y);
    let trace = BoundaryTrace::from_datum(&b, &h, 256, Ordinates::new(128)?);
    let mut reports = Vec::new();
    for eps in [0.2, 0.1, 0.05] {
        let problem = TransportProblem::new(b.clone(), eps, h.clone()).with_source(f.clone());
        let grids = TransportGrids::new(&b, eps, 8, 32)?;
        let (_, u) = solve_transport(&problem, &grids, &TransportConfig::default())?;
        let mut fv = Vec::with_capacity(u.values.len());
        for &x in grids.mesh.nodes() {
            for j in 0..grids.ordinates.len() {
                fv.push(f(x, grids.ordinates.velocity(j)));
            }
        }
        let norms = DataNorms::measure(&grids.mesh, &grids.ordinates, &fv, &trace, DEFAULT_M);
        reports.push(apriori_check(u.sup_norm(), &norms, eps, DEFAULT_M));
    }
    let spread = ratio_spread(&reports);
    let ratios: Vec<String> = reports.iter().map(|r| format!("{:.3e}", r.ratio)).collect();
    check(
        spread < 10.0,
        format!("ratios [{}], spread = {spread:.2} (< 10)", ratios.join(", ")),
    )
}

fn bisect_exit(b: &ConvexBoundary, x: Vec2, w: Vec2, eps: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 1.0);
    while b.contains(x - eps * hi * w) {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if b.contains(x - eps * mid * w) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn oracle_equivalence() -> Result<Check> {
    let mut notes = Vec::new();
    let mut ok = true;

    let h = |p: f64| 1.0 + 0.5 * p.sin();
    let fl: Vec<f64> = [(129usize, 128usize), (257, 256)]
        .iter()
        .map(|&(ne, np)| {
            let ctx = milne_ctx(0.1, ne, np, MeanInterpolation::Cubic);
            ctx.solve(&ctx.operator(1.0)?, &h, None).map(|s| s.f_l)
        })
        .collect::<Result<_>>()?;
    let d = (fl[0] - golden::F_L).abs().max((fl[1] - golden::F_L).abs());
    ok &= d <= golden::F_L_TOL;
    notes.push(format!("f_L {:.7}/{:.7}", fl[0], fl[1]));

    let b = ConvexBoundary::unit_disk();
    let lam: Vec<f64> = [(65usize, 128usize), (129, 256)]
        .iter()
        .map(|&(ne, np)| {
            let ctx = milne_ctx(0.1, ne, np, MeanInterpolation::Linear);
            decompose(&half_sine(), &b, &ctx, 0.5, 1).map(|d| d.samples[0].fit.map_or(f64::NAN, |f| f.lambda))
        })
        .collect::<Result<_>>()?;
    let d = (lam[0] - golden::LAMBDA).abs().max((lam[1] - golden::LAMBDA).abs());
    ok &= d <= golden::LAMBDA_TOL;
    notes.push(format!("lambda {:.5}/{:.5}", lam[0], lam[1]));

    let gm: Vec<f64> = [(256usize, 128usize), (512, 256)]
        .iter()
        .map(|&(n, m)| {
            Ordinates::new(m).map(|o| {
                boundary_norm(&BoundaryTrace::from_datum(&b, &BoundaryDatum::constant(1.0), n, o), 2.0, BoundarySide::In)
            })
        })
        .collect::<Result<_>>()?;
    let d = (gm[0] - golden::GAMMA_MINUS_UNIT).abs().max((gm[1] - golden::GAMMA_MINUS_UNIT).abs());
    ok &= d <= golden::GAMMA_MINUS_TOL;
    notes.push(format!("|1|_Gamma- {:.5}/{:.5}", gm[0], gm[1]));

    let ell = ConvexBoundary::new(vec![1.0, 0.08, 0.01])?;
    let mut worst = 0.0f64;
    for k in 0..24 {
        let x = Vec2::new(0.3 * (k as f64).cos(), 0.2 * (1.7 * k as f64).sin());
        let a = 0.37 * k as f64;
        let w = Vec2::new(a.cos(), a.sin());
        let t = exit_time(&ell, x, w, 0.1)?.t_b;
        worst = worst.max((t - bisect_exit(&ell, x, w, 0.1)).abs());
    }
    ok &= worst <= golden::EXIT_TIME_TOL;
    notes.push(format!("exit time {worst:.1e}"));

    check(ok, notes.join(", "))
}
