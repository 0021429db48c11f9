//! Asymptotic expansion `u ~ U0 + eps U1 + eps^2 U2 + UB0 + eps UB1 + UF0`.
//!
//! Interior fields are harmonic extensions of far-field values of
//! half-space problems; boundary layers are families of half-space
//! solutions indexed by the normal angle `tau`, each with its own frozen
//! radius of curvature.

pub mod harmonic;

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

pub use harmonic::{solve_laplace_dirichlet, tau_node, HarmonicField, PeriodicTable};

use crate::decomposition::{decompose_with, operators_for, tau_samples, BoundaryDatum, DecomposedDatum};
use crate::discretization::Ordinates;
use crate::error::{Error, Result};
use crate::geometry::{velocity_from_phi, BoundaryLayerCoords, ConvexBoundary, Vec2};
use crate::milne::{MilneContext, MilneOperator, MilneSolution};

/// Ordinates used for the angular moments of interior fields.
const MOMENT_ORDINATES: usize = 64;
/// Largest admissible second-order Poisson source.
pub const POISSON_RHS_LIMIT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerKind {
    Regular,
    Singular,
}

/// Half-space solutions `F(eta, phi; tau_k)` for uniform `tau_k`; the layer
/// itself is `F - F_L`.
#[derive(Debug, Clone)]
pub struct LayerFamily {
    pub kind: LayerKind,
    pub order: usize,
    pub epsilon: f64,
    pub taus: Vec<f64>,
    pub solutions: Vec<MilneSolution>,
}

impl LayerFamily {
    pub fn n_tau(&self) -> usize {
        self.taus.len()
    }

    /// Far-field values `F_L(tau_k)`.
    pub fn far_field(&self) -> Vec<f64> {
        self.solutions.iter().map(|s| s.f_l).collect()
    }

    pub fn far_field_table(&self) -> Result<PeriodicTable> {
        PeriodicTable::new(self.far_field())
    }

    pub fn length(&self) -> f64 {
        self.solutions[0].eta.length()
    }

    /// Nodal layer values `F - F_L` at sample `k`.
    pub fn layer_values(&self, k: usize) -> Vec<f64> {
        let s = &self.solutions[k];
        s.values.iter().map(|v| v - s.f_l).collect()
    }

    pub fn sup_norm(&self) -> f64 {
        self.solutions
            .iter()
            .flat_map(|s| s.values.iter().map(move |v| (v - s.f_l).abs()))
            .fold(0.0, f64::max)
    }

    /// Layer at `(eta, tau, phi)`: bilinear in `(eta, phi)` on each member,
    /// linear in `tau` between members, `eta` clamped to `[0, L]`.
    pub fn value(&self, eta: f64, tau: f64, phi: f64) -> f64 {
        let n = self.taus.len();
        let h = 2.0 * PI / n as f64;
        let s = (tau - self.taus[0]).rem_euclid(2.0 * PI) / h;
        let k0 = (s.floor() as usize).min(n - 1);
        let t = s - k0 as f64;
        let k1 = (k0 + 1) % n;
        let at = |k: usize| {
            let sol = &self.solutions[k];
            sol.interpolate(eta, phi) - sol.f_l
        };
        if t == 0.0 {
            at(k0)
        } else {
            (1.0 - t) * at(k0) + t * at(k1)
        }
    }

    /// Distance from the boundary beyond which the layer is taken as 0.
    pub fn cutoff(&self, boundary: &ConvexBoundary) -> f64 {
        layer_cutoff(boundary, self.epsilon, self.length())
    }

    pub fn value_at(&self, c: &BoundaryLayerCoords, boundary: &ConvexBoundary) -> f64 {
        if c.mu() >= self.cutoff(boundary) {
            0.0
        } else {
            self.value(c.eta, c.tau, c.phi)
        }
    }
}

pub fn layer_cutoff(boundary: &ConvexBoundary, epsilon: f64, length: f64) -> f64 {
    (0.5 * boundary.r_min()).min(10.0 * epsilon * length)
}

/// Layer value at a phase-space point; 0 away from the boundary.
pub fn evaluate_layer(family: &LayerFamily, x: Vec2, w: Vec2, boundary: &ConvexBoundary, epsilon: f64) -> f64 {
    match boundary.to_boundary_layer(x, w, epsilon) {
        Ok(c) => family.value_at(&c, boundary),
        Err(_) => 0.0,
    }
}

/// `d/d tau` of the layer by centred periodic differences, one nodal field
/// per `tau` sample.
pub fn tau_derivative(family: &LayerFamily) -> Result<Vec<Vec<f64>>> {
    let n = family.n_tau();
    if n < 8 {
        return Err(Error::InvalidInput(format!("tau derivative needs >= 8 samples, got {n}")));
    }
    let h = 2.0 * PI / n as f64;
    let layers: Vec<Vec<f64>> = (0..n).map(|k| family.layer_values(k)).collect();
    if layers.iter().any(|l| l.len() != layers[0].len()) {
        return Err(Error::InvalidGrid("layer members have different grids".into()));
    }
    Ok((0..n)
        .map(|k| {
            let (a, b) = (&layers[(k + 1) % n], &layers[(k + n - 1) % n]);
            a.iter().zip(b).map(|(p, m)| (p - m) / (2.0 * h)).collect()
        })
        .collect())
}

fn solve_family(
    kind: LayerKind,
    order: usize,
    ctx: &MilneContext,
    taus: &[f64],
    ops: &[Arc<MilneOperator>],
    data: impl Fn(usize, f64) -> f64 + Sync,
    sources: Option<&[Vec<f64>]>,
) -> Result<LayerFamily> {
    let solutions = (0..taus.len())
        .into_par_iter()
        .map(|k| {
            let src = sources.map(|s| s[k].as_slice());
            ctx.solve(&ops[k], &|p| data(k, p), src)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LayerFamily {
        kind,
        order,
        epsilon: ctx.epsilon,
        taus: taus.to_vec(),
        solutions,
    })
}

/// Regular and singular leading-order layers and `U0`.
pub fn build_order0(
    decomposed: &DecomposedDatum,
    boundary: &ConvexBoundary,
    ctx: &MilneContext,
    ops: &[Arc<MilneOperator>],
) -> Result<(LayerFamily, LayerFamily, HarmonicField)> {
    let taus: Vec<f64> = decomposed.samples.iter().map(|s| s.tau).collect();
    let ub0 = solve_family(LayerKind::Regular, 0, ctx, &taus, ops, |k, p| decomposed.g_flat(k, p), None)?;
    let uf0 = if decomposed.samples.iter().all(|s| s.fit.is_none()) {
        zero_family(LayerKind::Singular, 0, &ub0)
    } else {
        solve_family(LayerKind::Singular, 0, ctx, &taus, ops, |k, p| decomposed.g_sharp(k, p), None)?
    };
    let d: Vec<f64> = ub0.far_field().iter().zip(uf0.far_field()).map(|(a, b)| a + b).collect();
    let u0 = solve_laplace_dirichlet(boundary, &PeriodicTable::new(d)?)?;
    Ok((ub0, uf0, u0))
}

fn zero_family(kind: LayerKind, order: usize, like: &LayerFamily) -> LayerFamily {
    let solutions = like
        .solutions
        .iter()
        .map(|s| {
            let mut z = s.clone();
            z.values.iter_mut().for_each(|v| *v = 0.0);
            z.mean.iter_mut().for_each(|v| *v = 0.0);
            z.f_l = 0.0;
            z.iterations = 0;
            z.residual = 0.0;
            z
        })
        .collect();
    LayerFamily {
        kind,
        order,
        epsilon: like.epsilon,
        taus: like.taus.clone(),
        solutions,
    }
}

/// First-order regular layer and `U1`. The layer is driven by the
/// tangential derivative of `UB0` and by `w . grad U0` on the in-flow set.
pub fn build_order1(
    ub0: &LayerFamily,
    u0: &HarmonicField,
    boundary: &ConvexBoundary,
    ctx: &MilneContext,
    ops: &[Arc<MilneOperator>],
) -> Result<(LayerFamily, HarmonicField)> {
    let w = tau_derivative(ub0)?;
    let sources: Vec<Vec<f64>> = w
        .iter()
        .zip(&ub0.solutions)
        .zip(ops)
        .map(|((wk, sol), op)| {
            let np = sol.phi.len();
            let r = op.tracer().r_kappa();
            wk.iter()
                .enumerate()
                .map(|(n, v)| {
                    let (i, j) = (n / np, n % np);
                    sol.phi.nodes()[j].cos() / (r - ctx.epsilon * sol.eta.nodes()[i]) * v
                })
                .collect()
        })
        .collect();
    let has_source = sources.iter().any(|s| s.iter().any(|v| *v != 0.0));
    let grads: Vec<Vec2> = ub0.taus.iter().map(|&t| u0.gradient_at_boundary(boundary, t)).collect();
    let taus = ub0.taus.clone();
    let ub1 = if !has_source && grads.iter().all(|g| g.norm() == 0.0) {
        zero_family(LayerKind::Regular, 1, ub0)
    } else {
        solve_family(
            LayerKind::Regular,
            1,
            ctx,
            &taus,
            ops,
            |k, p| velocity_from_phi(taus[k], p).dot(&grads[k]),
            has_source.then_some(sources.as_slice()),
        )?
    };
    let u1 = solve_laplace_dirichlet(boundary, &ub1.far_field_table()?)?;
    Ok((ub1, u1))
}

/// Interior probe points `s x0(theta)` with their area weights.
pub fn interior_probes(boundary: &ConvexBoundary, n_s: usize, n_theta: usize) -> Vec<(Vec2, f64)> {
    let mut out = Vec::with_capacity(n_s * n_theta);
    let ds = 0.9 / n_s as f64;
    let dth = 2.0 * PI / n_theta as f64;
    for a in 0..n_s {
        let s = ds * (a as f64 + 0.5);
        for b in 0..n_theta {
            let th = -PI + dth * b as f64;
            let r = boundary.radius(th);
            out.push((s * r * Vec2::new(th.cos(), th.sin()), s * r * r * ds * dth));
        }
    }
    out
}

/// Poisson sources `-int w . grad u_{k-1} dw` of the first two interior
/// corrections, in `L2` over interior probes.
pub fn poisson_sources(u0: &HarmonicField, u1: &HarmonicField, boundary: &ConvexBoundary) -> [f64; 2] {
    let ord = Ordinates::new(MOMENT_ORDINATES).expect("valid ordinate count");
    let mut acc = [0.0, 0.0];
    for (x, wt) in interior_probes(boundary, 12, 24) {
        let g0 = u0.gradient(x);
        let g1 = u1.gradient(x);
        let h0 = u0.hessian(x);
        let mut s1 = 0.0;
        let mut s2 = 0.0;
        for (j, wj) in ord.weights().iter().enumerate() {
            let w = ord.velocity(j);
            s1 -= wj * w.dot(&g0);
            // u1 = U1 - w . grad U0, so w . grad u1 = w . grad U1 - w^T H0 w.
            s2 -= wj * (w.dot(&g1) - w.dot(&(h0 * w)));
        }
        acc[0] += wt * s1 * s1;
        acc[1] += wt * s2 * s2;
    }
    [acc[0].sqrt(), acc[1].sqrt()]
}

/// `U2`: zero Dirichlet data, and its Poisson source must vanish.
pub fn build_order2(u0: &HarmonicField, u1: &HarmonicField, boundary: &ConvexBoundary) -> Result<HarmonicField> {
    let [_, rhs] = poisson_sources(u0, u1, boundary);
    if rhs > POISSON_RHS_LIMIT {
        return Err(Error::NonzeroRhs { norm: rhs });
    }
    Ok(HarmonicField::zero())
}

/// Largest relative five-point Laplacian of `u` over interior probes.
pub fn harmonicity_probe(u: &HarmonicField, boundary: &ConvexBoundary, h: f64) -> f64 {
    let scale = u.trace().map_or(0.0, |t| t.sup_norm());
    if u.is_zero() || scale == 0.0 {
        return 0.0;
    }
    interior_probes(boundary, 6, 12)
        .iter()
        .map(|(x, _)| u.discrete_laplacian(*x, h).abs() / scale)
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpansionConfig {
    pub alpha: f64,
    pub n_tau: usize,
    pub decomposition: bool,
}

impl Default for ExpansionConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            n_tau: 32,
            decomposition: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExpansionBundle {
    pub epsilon: f64,
    pub boundary: ConvexBoundary,
    pub decomposed: DecomposedDatum,
    pub u0: HarmonicField,
    pub u1: HarmonicField,
    pub u2: HarmonicField,
    pub ub0: LayerFamily,
    pub ub1: LayerFamily,
    pub uf0: LayerFamily,
    /// `L2` norms of the measured Poisson sources of `U1` and `U2`.
    pub poisson_sources: [f64; 2],
}

/// Values of the expansion pieces at one phase-space point.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PieceValues {
    pub u0: f64,
    pub u1: f64,
    pub u2: f64,
    pub ub0: f64,
    pub ub1: f64,
    pub uf0: f64,
}

impl PieceValues {
    /// `U0 + eps U1 + eps^2 U2 + UB0 + eps UB1 + UF0`.
    pub fn full(&self, eps: f64) -> f64 {
        self.u0 + eps * self.u1 + eps * eps * self.u2 + self.ub0 + eps * self.ub1 + self.uf0
    }

    /// `U0 + UB0 + UF0`.
    pub fn leading(&self) -> f64 {
        self.u0 + self.ub0 + self.uf0
    }
}

impl ExpansionBundle {
    pub fn pieces(&self, x: Vec2, w: Vec2) -> PieceValues {
        let g0 = self.u0.gradient(x);
        let g1 = self.u1.gradient(x);
        let h0 = self.u0.hessian(x);
        let mut p = PieceValues {
            u0: self.u0.value(x),
            u1: self.u1.value(x) - w.dot(&g0),
            u2: self.u2.value(x) - w.dot(&g1) + w.dot(&(h0 * w)),
            ..Default::default()
        };
        if let Ok(c) = self.boundary.to_boundary_layer(x, w, self.epsilon) {
            p.ub0 = self.ub0.value_at(&c, &self.boundary);
            p.ub1 = self.ub1.value_at(&c, &self.boundary);
            p.uf0 = self.uf0.value_at(&c, &self.boundary);
        }
        p
    }

    /// `sup |U0 + UB0 + UF0 - g|` over in-flow nodes at every `tau` sample.
    pub fn matching_error(&self) -> f64 {
        let mut m = 0.0f64;
        for (k, &tau) in self.ub0.taus.iter().enumerate() {
            let x0 = self.boundary.point(self.boundary.theta_of_tau(tau));
            let u0 = self.u0.value(x0);
            let (b, f) = (&self.ub0.solutions[k], &self.uf0.solutions[k]);
            for (j, &p) in b.phi.nodes().iter().enumerate() {
                if p.sin() > 0.0 {
                    let v = u0 + (b.value(0, j) - b.f_l) + (f.value(0, j) - f.f_l);
                    m = m.max((v - self.decomposed.g(k, p)).abs());
                }
            }
        }
        m
    }

    /// Relative discrete Laplacians of `U0`, `U1`, `U2`.
    pub fn harmonicity(&self, h: f64) -> [f64; 3] {
        [
            harmonicity_probe(&self.u0, &self.boundary, h),
            harmonicity_probe(&self.u1, &self.boundary, h),
            harmonicity_probe(&self.u2, &self.boundary, h),
        ]
    }
}

/// Decomposes `g` and builds every piece of the expansion.
pub fn build_expansion(
    g: &BoundaryDatum,
    boundary: &ConvexBoundary,
    ctx: &MilneContext,
    cfg: &ExpansionConfig,
) -> Result<ExpansionBundle> {
    let taus = tau_samples(cfg.n_tau);
    let radii: Vec<f64> = taus.iter().map(|&t| boundary.radius_of_curvature_at_tau(t)).collect();
    let ops = operators_for(ctx, &radii)?;
    let decomposed = if cfg.decomposition {
        decompose_with(g, ctx, cfg.alpha, &taus, &ops)?
    } else {
        undecomposed(g, ctx, cfg.alpha, &taus, &radii)
    };
    let (ub0, uf0, u0) = build_order0(&decomposed, boundary, ctx, &ops)?;
    let (ub1, u1) = build_order1(&ub0, &u0, boundary, ctx, &ops)?;
    let poisson = poisson_sources(&u0, &u1, boundary);
    let u2 = build_order2(&u0, &u1, boundary)?;
    Ok(ExpansionBundle {
        epsilon: ctx.epsilon,
        boundary: boundary.clone(),
        decomposed,
        u0,
        u1,
        u2,
        ub0,
        ub1,
        uf0,
        poisson_sources: poisson,
    })
}

/// Trivial split `g_flat = g`, `g_sharp = 0`.
fn undecomposed(g: &BoundaryDatum, ctx: &MilneContext, alpha: f64, taus: &[f64], radii: &[f64]) -> DecomposedDatum {
    use crate::decomposition::{inflow_extremes, TauDecomposition};
    let samples = taus
        .iter()
        .zip(radii)
        .map(|(&tau, &r)| {
            let gt = g.at_tau(tau);
            let (g_min, g_max) = inflow_extremes(&gt);
            TauDecomposition {
                tau,
                r_kappa: r,
                g_min,
                g_max,
                delta: ctx.epsilon.powf(alpha),
                fit: None,
            }
        })
        .collect();
    DecomposedDatum {
        datum: g.clone(),
        alpha,
        epsilon: ctx.epsilon,
        samples,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milne::MilneGridSpec;
    use approx::assert_relative_eq;

    fn ctx(eps: f64) -> MilneContext {
        MilneContext::new(
            eps,
            MilneGridSpec {
                n_eta: 25,
                n_phi: 32,
                ..Default::default()
            },
        )
    }

    #[test]
    fn constant_data_collapses() {
        let b = ConvexBoundary::unit_disk();
        let e = build_expansion(&BoundaryDatum::constant(1.0), &b, &ctx(0.1), &ExpansionConfig::default()).unwrap();
        assert!(e.ub0.sup_norm() < 1e-10);
        assert!(e.uf0.sup_norm() == 0.0);
        assert!(e.ub1.sup_norm() < 1e-10);
        let x = Vec2::new(0.3, 0.9);
        let w = Vec2::new(0.6, -0.8);
        let p = e.pieces(Vec2::new(0.2, 0.1), w);
        assert_relative_eq!(p.u0, 1.0, epsilon = 1e-10);
        assert!(p.u1.abs() < 1e-10 && p.u2.abs() < 1e-10);
        assert_relative_eq!(e.pieces(x, w).full(0.1), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn tau_independent_disk_data() {
        let b = ConvexBoundary::unit_disk();
        let c = ctx(0.1);
        let g = BoundaryDatum::new(|_, p| 1.0 + 0.5 * p.sin());
        let e = build_expansion(&g, &b, &c, &ExpansionConfig::default()).unwrap();
        let fl = e.ub0.solutions[0].f_l + e.uf0.solutions[0].f_l;
        for k in 1..e.ub0.n_tau() {
            assert_relative_eq!(e.ub0.solutions[k].f_l + e.uf0.solutions[k].f_l, fl, epsilon = 1e-12);
        }
        assert_relative_eq!(e.u0.value(Vec2::new(0.3, -0.2)), fl, epsilon = 1e-12);
        assert!(e.u0.gradient(Vec2::new(0.3, -0.2)).norm() < 1e-12);
        assert!(e.matching_error() < 1e-9, "{}", e.matching_error());
        assert!(e.poisson_sources[0] < 1e-8 && e.poisson_sources[1] < 1e-8);
        assert!(e.ub1.sup_norm() < 1e-10);
    }

    #[test]
    fn tau_derivative_of_cos_modulation_is_second_order() {
        let b = ConvexBoundary::unit_disk();
        let c = ctx(0.1);
        let g = BoundaryDatum::new(|t, p| 1.0 + 0.5 * p.sin() * t.cos());
        let cfg = ExpansionConfig {
            decomposition: false,
            ..Default::default()
        };
        // W at tau = pi/2 (sample index n/4 + n/2 from -pi).
        let mut vals = Vec::new();
        for n in [16, 32, 64] {
            let e = build_expansion(&g, &b, &c, &ExpansionConfig { n_tau: n, ..cfg }).unwrap();
            let w = tau_derivative(&e.ub0).unwrap();
            let k = 3 * n / 4;
            assert_relative_eq!(e.ub0.taus[k], PI / 2.0, epsilon = 1e-12);
            let np = e.ub0.solutions[0].phi.len();
            // Sin modulation: W at tau = 0 vanishes.
            let k0 = n / 2;
            assert!(w[k0].iter().fold(0.0f64, |m, v| m.max(v.abs())) < 1e-10);
            vals.push(w[k][np / 2 + np / 4 - 1]);
        }
        let order = ((vals[0] - vals[1]) / (vals[1] - vals[2])).log2();
        assert!(order > 1.8, "{order}");
    }

    #[test]
    fn layer_vanishes_far_from_boundary() {
        let b = ConvexBoundary::unit_disk();
        let g = BoundaryDatum::new(|_, p| 1.0 + 0.5 * p.sin());
        let e = build_expansion(&g, &b, &ctx(0.1), &ExpansionConfig::default()).unwrap();
        let w = Vec2::new(1.0, 0.0);
        assert_eq!(evaluate_layer(&e.ub0, Vec2::new(0.2, 0.0), w, &b, 0.1), 0.0);
        // On the boundary the in-flow trace is reproduced at grid directions.
        let x = Vec2::new(1.0, 0.0);
        let phi = e.ub0.solutions[0].phi.nodes()[20];
        assert!(phi.sin() > 0.0);
        let w_in = velocity_from_phi(0.0, phi);
        let v = evaluate_layer(&e.ub0, x, w_in, &b, 0.1) + evaluate_layer(&e.uf0, x, w_in, &b, 0.1);
        assert_relative_eq!(v + e.u0.value(x), 1.0 + 0.5 * phi.sin(), epsilon = 1e-9);
    }
}
