//! Discrete phase-space and boundary norms, the remainder of the
//! expansion, the small-`epsilon` study, and a-priori ratio diagnostics.

use std::f64::consts::PI;

use serde::Serialize;

use crate::decomposition::BoundaryDatum;
use crate::discretization::{Ordinates, SpatialMesh};
use crate::error::{Error, Result};
use crate::expansion::{build_expansion, ExpansionBundle, ExpansionConfig};
use crate::geometry::{phi_from_velocity, ConvexBoundary, Vec2};
use crate::milne::{MeanInterpolation, MilneContext, MilneGridSpec};
use crate::transport2d::{
    self_convergence, sweep_at, PhaseField, SelfConvergence, TransportConfig, TransportGrids, TransportProblem,
};

/// Lower and upper bounds on `d_{01} / d_{12}` for a refinement study in
/// which differences halve, within 50%.
pub const SELF_CONVERGENCE_BAND: (f64, f64) = (4.0 / 3.0, 4.0);

/// Default Hölder exponent `m` of the `L^{2m}` norm.
pub const DEFAULT_M: u32 = 6;
/// Default decay rate for decay diagnostics.
pub const DEFAULT_K0: f64 = 0.1;

fn lp(values: impl Iterator<Item = (f64, f64)>, p: f64) -> f64 {
    if p.is_infinite() {
        return values.fold(0.0, |m, (_, v)| m.max(v.abs()));
    }
    values.map(|(w, v)| w * v.abs().powf(p)).sum::<f64>().powf(1.0 / p)
}

/// `L^p(Omega x S^1)` of a node-major field; `p = f64::INFINITY` for sup.
pub fn phase_norm(mesh: &SpatialMesh, ordinates: &Ordinates, values: &[f64], p: f64) -> f64 {
    let m = ordinates.len();
    let mw = mesh.weights();
    let ow = ordinates.weights();
    lp(values.iter().enumerate().map(|(n, &v)| (mw[n / m] * ow[n % m], v)), p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundarySide {
    In,
    Out,
}

/// Values on `boundary x S^1` with the measure `|w . n| dw dS`.
#[derive(Debug, Clone)]
pub struct BoundaryTrace {
    /// Arc length weight and outward normal of each boundary sample.
    pub samples: Vec<(Vec2, f64, Vec2)>,
    pub ordinates: Ordinates,
    pub values: Vec<f64>,
}

impl BoundaryTrace {
    /// In-flow datum sampled at `n_points` uniform polar angles.
    pub fn from_datum(boundary: &ConvexBoundary, h: &BoundaryDatum, n_points: usize, ordinates: Ordinates) -> Self {
        let dtheta = 2.0 * PI / n_points as f64;
        let samples: Vec<(Vec2, f64, Vec2)> = (0..n_points)
            .map(|k| {
                let th = k as f64 * dtheta;
                let (r, dr, _) = boundary.radius_derivatives(th);
                (boundary.point(th), (r * r + dr * dr).sqrt() * dtheta, boundary.normal(th))
            })
            .collect();
        let mut values = Vec::with_capacity(n_points * ordinates.len());
        for &(_, _, n) in &samples {
            let tau = n.y.atan2(n.x);
            for j in 0..ordinates.len() {
                let w = ordinates.velocity(j);
                values.push(if w.dot(&n) < 0.0 { h.eval(tau, phi_from_velocity(tau, w)) } else { 0.0 });
            }
        }
        Self {
            samples,
            ordinates,
            values,
        }
    }
}

/// `L^p(Gamma^-)` or `L^p(Gamma^+)` with weight `|w . n|`.
pub fn boundary_norm(trace: &BoundaryTrace, p: f64, side: BoundarySide) -> f64 {
    let m = trace.ordinates.len();
    let ow = trace.ordinates.weights();
    let it = trace.values.iter().enumerate().filter_map(|(n, &v)| {
        let (_, ds, normal) = trace.samples[n / m];
        let wn = trace.ordinates.velocity(n % m).dot(&normal);
        let keep = match side {
            BoundarySide::In => wn < 0.0,
            BoundarySide::Out => wn > 0.0,
        };
        keep.then_some((ds * ow[n % m] * wn.abs(), v))
    });
    lp(it, p)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormReport {
    pub epsilon: f64,
    pub l2: f64,
    pub l_inf: f64,
    pub m: u32,
    pub l_2m: f64,
    pub gamma_minus_l2: f64,
    pub gamma_minus_l_inf: f64,
}

pub fn norm_report(
    epsilon: f64,
    mesh: &SpatialMesh,
    ordinates: &Ordinates,
    values: &[f64],
    trace: &BoundaryTrace,
    m: u32,
) -> NormReport {
    NormReport {
        epsilon,
        l2: phase_norm(mesh, ordinates, values, 2.0),
        l_inf: phase_norm(mesh, ordinates, values, f64::INFINITY),
        m,
        l_2m: phase_norm(mesh, ordinates, values, 2.0 * m as f64),
        gamma_minus_l2: boundary_norm(trace, 2.0, BoundarySide::In),
        gamma_minus_l_inf: boundary_norm(trace, f64::INFINITY, BoundarySide::In),
    }
}

/// `u = Q + QB + QF + R` at every evaluation node and ordinate, with `Q`
/// the interior expansion, `QB = UB0 + eps UB1`, `QF = UF0`.
#[derive(Debug, Clone)]
pub struct RemainderBundle {
    pub epsilon: f64,
    pub q: Vec<f64>,
    pub qb: Vec<f64>,
    pub qf: Vec<f64>,
    pub r: Vec<f64>,
    /// `u - U0 - UB0 - UF0`.
    pub r0: Vec<f64>,
    /// Nodes where the ordinate straddles the tangent at a boundary point.
    pub grazing: Vec<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RemainderNorms {
    pub sup: f64,
    pub sup_excluding_grazing: f64,
    pub l2: f64,
}

impl RemainderBundle {
    fn norms_of(&self, v: &[f64], mesh: &SpatialMesh, ordinates: &Ordinates) -> RemainderNorms {
        RemainderNorms {
            sup: phase_norm(mesh, ordinates, v, f64::INFINITY),
            sup_excluding_grazing: v
                .iter()
                .zip(&self.grazing)
                .filter(|(_, g)| !**g)
                .fold(0.0, |m, (x, _)| m.max(x.abs())),
            l2: phase_norm(mesh, ordinates, v, 2.0),
        }
    }

    pub fn r_norms(&self, mesh: &SpatialMesh, ordinates: &Ordinates) -> RemainderNorms {
        self.norms_of(&self.r, mesh, ordinates)
    }

    pub fn r0_norms(&self, mesh: &SpatialMesh, ordinates: &Ordinates) -> RemainderNorms {
        self.norms_of(&self.r0, mesh, ordinates)
    }
}

/// Subtracts the expansion from `u` node by node.
pub fn assemble_remainder(
    u: &PhaseField,
    mesh: &SpatialMesh,
    ordinates: &Ordinates,
    bundle: &ExpansionBundle,
) -> RemainderBundle {
    let m = ordinates.len();
    let eps = bundle.epsilon;
    let n = mesh.len() * m;
    let mut out = RemainderBundle {
        epsilon: eps,
        q: Vec::with_capacity(n),
        qb: Vec::with_capacity(n),
        qf: Vec::with_capacity(n),
        r: Vec::with_capacity(n),
        r0: Vec::with_capacity(n),
        grazing: Vec::with_capacity(n),
    };
    let grazing_cut = (PI / m as f64).sin() * (1.0 + 1e-9);
    for (i, &x) in mesh.nodes().iter().enumerate() {
        let on_boundary = mesh.boundary_flags()[i];
        let normal = if on_boundary {
            let th = x.y.atan2(x.x);
            Some(mesh.boundary().normal(th))
        } else {
            None
        };
        for j in 0..m {
            let w = ordinates.velocity(j);
            let p = bundle.pieces(x, w);
            let v = u.value(i, j);
            let q = p.u0 + eps * p.u1 + eps * eps * p.u2;
            let qb = p.ub0 + eps * p.ub1;
            out.q.push(q);
            out.qb.push(qb);
            out.qf.push(p.uf0);
            out.r.push(v - q - qb - p.uf0);
            out.r0.push(v - p.leading());
            out.grazing
                .push(normal.is_some_and(|nrm| w.dot(&nrm).abs() <= grazing_cut));
        }
    }
    out
}

/// Least-squares slope of `log values` against `log epsilons`.
pub fn fit_order(epsilons: &[f64], values: &[f64]) -> f64 {
    let n = epsilons.len() as f64;
    let xs: Vec<f64> = epsilons.iter().map(|e| e.ln()).collect();
    let ys: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Settings of the small-`epsilon` study.
#[derive(Debug, Clone)]
pub struct LimitStudyConfig {
    pub boundary: ConvexBoundary,
    pub datum: BoundaryDatum,
    pub epsilons: Vec<f64>,
    /// Base mesh resolution and ordinate count; two refinements are run.
    pub resolution: usize,
    pub n_ordinates: usize,
    /// Refinement level (0, 1 or 2) of the grid the remainder is reported on;
    /// `u` there is always swept from the finest `u_bar`.
    pub evaluation_level: usize,
    pub milne: MilneGridSpec,
    pub interpolation: MeanInterpolation,
    pub expansion: ExpansionConfig,
    pub transport: TransportConfig,
}

impl LimitStudyConfig {
    pub fn disk_default(datum: BoundaryDatum) -> Self {
        Self {
            boundary: ConvexBoundary::unit_disk(),
            datum,
            epsilons: vec![0.2, 0.1, 0.05],
            resolution: 8,
            n_ordinates: 32,
            evaluation_level: 1,
            milne: MilneGridSpec {
                n_eta: 129,
                n_phi: 128,
                ..Default::default()
            },
            interpolation: MeanInterpolation::Linear,
            expansion: ExpansionConfig::default(),
            transport: TransportConfig::default(),
        }
    }
}

/// Everything computed at one `epsilon`.
#[derive(Debug, Clone)]
pub struct LimitPoint {
    pub epsilon: f64,
    pub expansion: ExpansionBundle,
    pub refinement: SelfConvergence,
    pub evaluation: TransportGrids,
    pub field: PhaseField,
    pub remainder: RemainderBundle,
}

impl LimitPoint {
    pub fn r0_norms(&self) -> RemainderNorms {
        self.remainder.r0_norms(&self.evaluation.mesh, &self.evaluation.ordinates)
    }

    pub fn r_norms(&self) -> RemainderNorms {
        self.remainder.r_norms(&self.evaluation.mesh, &self.evaluation.ordinates)
    }
}

fn resolved(sc: &SelfConvergence) -> bool {
    sc.halves()
}

/// Solves transport and builds the expansion at one `epsilon`.
pub fn limit_point(cfg: &LimitStudyConfig, epsilon: f64) -> Result<LimitPoint> {
    let mut ctx = MilneContext::new(epsilon, cfg.milne);
    ctx.interpolation = cfg.interpolation;
    let expansion = build_expansion(&cfg.datum, &cfg.boundary, &ctx, &cfg.expansion)?;
    let problem = TransportProblem::new(cfg.boundary.clone(), epsilon, cfg.datum.clone());
    let base = TransportGrids::new(&cfg.boundary, epsilon, cfg.resolution, cfg.n_ordinates)?;
    let refinement = self_convergence(&problem, &base, &cfg.transport)?;
    if !resolved(&refinement) {
        return Err(Error::UnresolvedRun {
            epsilon,
            ratio: refinement.ratio,
        });
    }
    let level = cfg.evaluation_level.min(2);
    let evaluation = refinement.levels[level].grids.clone();
    let fine = &refinement.levels[2];
    let field = sweep_at(
        &problem,
        &fine.grids,
        &fine.mean,
        evaluation.mesh.nodes(),
        &evaluation.ordinates,
    )?;
    let remainder = assemble_remainder(&field, &evaluation.mesh, &evaluation.ordinates, &expansion);
    Ok(LimitPoint {
        epsilon,
        expansion,
        refinement,
        evaluation,
        field,
        remainder,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct LimitRow {
    pub epsilon: f64,
    pub r0_sup: f64,
    pub r0_sup_excluding_grazing: f64,
    pub r0_l2: f64,
    pub r_sup: f64,
    pub r_l2: f64,
    pub self_convergence_ratio: f64,
    pub u_sup: f64,
    pub ub0_sup: f64,
    pub uf0_sup: f64,
    pub ub1_sup: f64,
    pub matching_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LimitStudy {
    pub rows: Vec<LimitRow>,
    /// Slope of `log ||R0||_inf` against `log epsilon`.
    pub fitted_order: f64,
    pub fitted_order_excluding_grazing: f64,
    pub fitted_order_l2: f64,
}

impl LimitStudy {
    pub fn strictly_decreasing(&self) -> bool {
        // Rows are in the order given; compare by epsilon.
        let mut rows: Vec<&LimitRow> = self.rows.iter().collect();
        rows.sort_by(|a, b| b.epsilon.partial_cmp(&a.epsilon).unwrap());
        rows.windows(2).all(|w| w[1].r0_sup < w[0].r0_sup)
    }
}

pub fn limit_row(p: &LimitPoint) -> LimitRow {
    let r0 = p.r0_norms();
    let r = p.r_norms();
    LimitRow {
        epsilon: p.epsilon,
        r0_sup: r0.sup,
        r0_sup_excluding_grazing: r0.sup_excluding_grazing,
        r0_l2: r0.l2,
        r_sup: r.sup,
        r_l2: r.l2,
        self_convergence_ratio: p.refinement.ratio,
        u_sup: p.field.sup_norm(),
        ub0_sup: p.expansion.ub0.sup_norm(),
        uf0_sup: p.expansion.uf0.sup_norm(),
        ub1_sup: p.expansion.ub1.sup_norm(),
        matching_error: p.expansion.matching_error(),
    }
}

pub fn summarize(rows: Vec<LimitRow>) -> Result<LimitStudy> {
    if rows.len() < 3 {
        return Err(Error::InvalidInput(format!("need >= 3 epsilon values, got {}", rows.len())));
    }
    let eps: Vec<f64> = rows.iter().map(|r| r.epsilon).collect();
    let col = |f: fn(&LimitRow) -> f64| rows.iter().map(f).collect::<Vec<f64>>();
    Ok(LimitStudy {
        fitted_order: fit_order(&eps, &col(|r| r.r0_sup)),
        fitted_order_excluding_grazing: fit_order(&eps, &col(|r| r.r0_sup_excluding_grazing)),
        fitted_order_l2: fit_order(&eps, &col(|r| r.r0_l2)),
        rows,
    })
}

/// Runs every `epsilon` of the study and fits the decay order of `R0`.
pub fn convergence_study(cfg: &LimitStudyConfig) -> Result<LimitStudy> {
    if cfg.epsilons.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "need >= 3 epsilon values, got {}",
            cfg.epsilons.len()
        )));
    }
    let rows = cfg
        .epsilons
        .iter()
        .map(|&e| limit_point(cfg, e).map(|p| limit_row(&p)))
        .collect::<Result<Vec<_>>>()?;
    summarize(rows)
}

/// Data norms entering the a-priori estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DataNorms {
    pub f_l2: f64,
    pub f_dual: f64,
    pub f_inf: f64,
    pub h_l2: f64,
    pub h_lm: f64,
    pub h_inf: f64,
}

impl DataNorms {
    /// Norms of a source sampled on the mesh and of the in-flow trace.
    pub fn measure(
        mesh: &SpatialMesh,
        ordinates: &Ordinates,
        f_values: &[f64],
        trace: &BoundaryTrace,
        m: u32,
    ) -> Self {
        let m = m as f64;
        Self {
            f_l2: phase_norm(mesh, ordinates, f_values, 2.0),
            f_dual: phase_norm(mesh, ordinates, f_values, 2.0 * m / (2.0 * m - 1.0)),
            f_inf: phase_norm(mesh, ordinates, f_values, f64::INFINITY),
            h_l2: boundary_norm(trace, 2.0, BoundarySide::In),
            h_lm: boundary_norm(trace, m, BoundarySide::In),
            h_inf: boundary_norm(trace, f64::INFINITY, BoundarySide::In),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AprioriReport {
    pub epsilon: f64,
    pub m: u32,
    pub u_inf: f64,
    /// Sharp bracket with the `L^{2m}` interpolation.
    pub bracket: f64,
    /// Bracket of the first, cruder estimate.
    pub bracket_first_round: f64,
    pub ratio: f64,
    pub ratio_first_round: f64,
}

pub fn apriori_brackets(norms: &DataNorms, epsilon: f64, m: u32) -> (f64, f64) {
    let im = 1.0 / m as f64;
    let e = epsilon;
    let sharp = e.powf(-1.0 - im) * norms.f_l2
        + e.powf(-2.0 - im) * norms.f_dual
        + norms.f_inf
        + e.powf(-0.5 - im) * norms.h_l2
        + e.powf(-im) * norms.h_lm
        + norms.h_inf;
    let first = e.powi(-3) * norms.f_l2 + norms.f_inf + e.powf(-1.5) * norms.h_l2 + norms.h_inf;
    (sharp, first)
}

pub fn apriori_check(u_inf: f64, norms: &DataNorms, epsilon: f64, m: u32) -> AprioriReport {
    let (bracket, first) = apriori_brackets(norms, epsilon, m);
    AprioriReport {
        epsilon,
        m,
        u_inf,
        bracket,
        bracket_first_round: first,
        ratio: u_inf / bracket,
        ratio_first_round: u_inf / first,
    }
}

/// `max ratio / min ratio` over a sweep.
pub fn ratio_spread(reports: &[AprioriReport]) -> f64 {
    let hi = reports.iter().map(|r| r.ratio).fold(f64::NEG_INFINITY, f64::max);
    let lo = reports.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min);
    hi / lo
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn unit_constant_norms_on_the_disk() {
        let b = ConvexBoundary::unit_disk();
        let mesh = SpatialMesh::new(&b, 0.1, 16).unwrap();
        let ord = Ordinates::new(64).unwrap();
        let ones = vec![1.0; mesh.len() * ord.len()];
        assert_relative_eq!(phase_norm(&mesh, &ord, &ones, 2.0), (2.0 * PI * PI).sqrt(), epsilon = 1e-12);
        assert_eq!(phase_norm(&mesh, &ord, &ones, f64::INFINITY), 1.0);
        let tr = BoundaryTrace::from_datum(&b, &BoundaryDatum::constant(1.0), 256, Ordinates::new(256).unwrap());
        assert_relative_eq!(boundary_norm(&tr, 2.0, BoundarySide::In), 2.0 * PI.sqrt(), epsilon = 1e-4);
        assert_eq!(boundary_norm(&tr, 2.0, BoundarySide::Out), 0.0);
    }

    #[test]
    fn sup_is_max_abs() {
        let b = ConvexBoundary::unit_disk();
        let mesh = SpatialMesh::new(&b, 0.2, 4).unwrap();
        let ord = Ordinates::new(8).unwrap();
        let mut v = vec![0.5; mesh.len() * ord.len()];
        v[17] = -3.0;
        assert_eq!(phase_norm(&mesh, &ord, &v, f64::INFINITY), 3.0);
    }

    #[test]
    fn fitted_slopes_of_power_laws() {
        let eps = [0.2, 0.1, 0.05];
        let half: Vec<f64> = eps.iter().map(|e: &f64| 3.0 * e.sqrt()).collect();
        assert!((fit_order(&eps, &half) - 0.5).abs() < 1e-12);
        assert!(fit_order(&eps, &[2.0, 2.0, 2.0]).abs() < 1e-12);
    }

    #[test]
    fn bracket_of_unit_inflow() {
        let b = ConvexBoundary::unit_disk();
        let tr = BoundaryTrace::from_datum(&b, &BoundaryDatum::constant(1.0), 128, Ordinates::new(64).unwrap());
        let mesh = SpatialMesh::new(&b, 0.1, 4).unwrap();
        let ord = Ordinates::new(16).unwrap();
        let f = vec![0.0; mesh.len() * ord.len()];
        let n = DataNorms::measure(&mesh, &ord, &f, &tr, DEFAULT_M);
        let r = apriori_check(1.0, &n, 0.1, DEFAULT_M);
        assert!(r.bracket >= 1.0 && r.ratio <= 1.0);
        // With fixed norms the sharp f-coefficient is smaller for small eps.
        let g = DataNorms { f_l2: 1.0, f_dual: 1.0, ..n };
        let (sharp, first) = apriori_brackets(&g, 0.01, DEFAULT_M);
        assert!(sharp < first);
    }
}
