//! Splitting of in-flow data into a part that is regular at the grazing set
//! and a part supported in a thin band around it.
//!
//! At each boundary sample the datum is mapped affinely into `[0, 1]`, two
//! auxiliary data are built that agree with it away from grazing and sit on
//! the plateaus 0 and 1 near grazing, and the convex combination whose
//! half-space solution satisfies `f(0, 0+) = f_bar(0)` becomes the regular
//! part. The remainder is the singular part:
//! `g_sharp = (g_max - g_min) chi (g_n - (1 - lambda))` with `chi` the cutoff
//! at scale `epsilon^alpha`.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::ConvexBoundary;
use crate::milne::{weighted_derivatives, MilneContext, MilneOperator, MilneSolution};

/// Samples used to find the range of a datum on `[0, pi]`.
const RANGE_SAMPLES: usize = 4096;

pub type DatumFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// In-flow data `g(tau, phi)` for `sin phi > 0`, periodic in `tau`.
#[derive(Clone)]
pub struct BoundaryDatum {
    g: DatumFn,
}

impl std::fmt::Debug for BoundaryDatum {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BoundaryDatum").finish_non_exhaustive()
    }
}

impl BoundaryDatum {
    pub fn new<F>(g: F) -> Self
    where
        F: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        Self { g: Arc::new(g) }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(move |_, _| c)
    }

    pub fn eval(&self, tau: f64, phi: f64) -> f64 {
        (self.g)(tau, phi)
    }

    pub fn at_tau(&self, tau: f64) -> impl Fn(f64) -> f64 + '_ {
        move |phi| (self.g)(tau, phi)
    }

    /// Sampled sup norm over `tau x (0, pi)`.
    pub fn sup_norm(&self, n_tau: usize, n_phi: usize) -> f64 {
        let mut m = 0.0f64;
        for a in 0..n_tau {
            let tau = -PI + 2.0 * PI * a as f64 / n_tau as f64;
            for b in 0..n_phi {
                let phi = PI * (b as f64 + 0.5) / n_phi as f64;
                m = m.max(self.eval(tau, phi).abs());
            }
        }
        m
    }
}

/// `C^infinity` cutoff in `s = |sin phi|`: 1 for `s <= scale`, 0 for
/// `s >= 2 scale`, built from `psi(t) = exp(-1/t)`.
pub fn smooth_cutoff(phi: f64, scale: f64) -> f64 {
    let s = phi.sin().abs();
    let x = (s - scale) / scale;
    if x <= 0.0 {
        return 1.0;
    }
    if x >= 1.0 {
        return 0.0;
    }
    let psi = |t: f64| if t <= 0.0 { 0.0 } else { (-1.0 / t).exp() };
    let a = psi(1.0 - x);
    a / (a + psi(x))
}

/// Normalised auxiliary data at one boundary point.
pub struct Auxiliaries<'a> {
    g: &'a dyn Fn(f64) -> f64,
    pub g_min: f64,
    pub g_max: f64,
    /// Cutoff scale `epsilon^alpha`.
    pub delta: f64,
}

impl Auxiliaries<'_> {
    pub fn normalized(&self, phi: f64) -> f64 {
        ((self.g)(phi) - self.g_min) / (self.g_max - self.g_min)
    }

    /// 0 near grazing, equal to the normalised datum away from it.
    pub fn g1(&self, phi: f64) -> f64 {
        (1.0 - smooth_cutoff(phi, self.delta)) * self.normalized(phi)
    }

    /// 1 near grazing, equal to the normalised datum away from it.
    pub fn g2(&self, phi: f64) -> f64 {
        let chi = smooth_cutoff(phi, self.delta);
        chi + (1.0 - chi) * self.normalized(phi)
    }

    /// Undo the normalisation.
    pub fn denormalize(&self, v: f64) -> f64 {
        self.g_min + (self.g_max - self.g_min) * v
    }
}

/// Range of `g` over `[0, pi]`.
pub fn inflow_extremes(g: &dyn Fn(f64) -> f64) -> (f64, f64) {
    (0..=RANGE_SAMPLES)
        .map(|k| g(PI * k as f64 / RANGE_SAMPLES as f64))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

pub fn build_auxiliaries<'a>(g: &'a dyn Fn(f64) -> f64, epsilon: f64, alpha: f64) -> Result<Auxiliaries<'a>> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidInput(format!("alpha = {alpha} not in (0, 1)")));
    }
    let (g_min, g_max) = inflow_extremes(g);
    if !(g_max - g_min > 1e-13 * g_max.abs().max(g_min.abs()).max(1.0)) {
        return Err(Error::DegenerateDatum);
    }
    Ok(Auxiliaries {
        g,
        g_min,
        g_max,
        delta: epsilon.powf(alpha),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaFit {
    pub lambda: f64,
    /// Value obtained from the condition at `phi = pi-`.
    pub lambda_pi: f64,
    pub d1: f64,
    pub d2: f64,
}

impl LambdaFit {
    pub fn discrepancy(&self) -> f64 {
        (self.lambda - self.lambda_pi).abs()
    }
}

/// Solves the half-space problems for `g1` and `g2` and returns the
/// `lambda` that makes `f(0, 0+) = f_bar(0)` for the combination.
pub fn find_lambda(aux: &Auxiliaries<'_>, ctx: &MilneContext, op: &MilneOperator) -> Result<LambdaFit> {
    let f1 = ctx.solve(op, &|p| aux.g1(p), None)?;
    let f2 = ctx.solve(op, &|p| aux.g2(p), None)?;
    lambda_from_solutions(aux, &f1, &f2)
}

pub fn lambda_from_solutions(aux: &Auxiliaries<'_>, f1: &MilneSolution, f2: &MilneSolution) -> Result<LambdaFit> {
    let tiny = 1e-12;
    let d1 = aux.g1(tiny) - f1.mean[0];
    let d2 = aux.g2(tiny) - f2.mean[0];
    if d1 >= 0.0 || d2 <= 0.0 {
        return Err(Error::SignViolation { d1, d2 });
    }
    let d1p = aux.g1(PI - tiny) - f1.mean[0];
    let d2p = aux.g2(PI - tiny) - f2.mean[0];
    Ok(LambdaFit {
        lambda: d2 / (d2 - d1),
        lambda_pi: d2p / (d2p - d1p),
        d1,
        d2,
    })
}

/// Decomposition parameters at one boundary sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TauDecomposition {
    pub tau: f64,
    pub r_kappa: f64,
    pub g_min: f64,
    pub g_max: f64,
    pub delta: f64,
    /// `None` when the datum is constant in `phi` at this `tau`.
    pub fit: Option<LambdaFit>,
}

impl TauDecomposition {
    pub fn sharp(&self, g: f64, phi: f64) -> f64 {
        match self.fit {
            None => 0.0,
            Some(fit) => {
                let chi = smooth_cutoff(phi, self.delta);
                if chi == 0.0 {
                    return 0.0;
                }
                let gn = (g - self.g_min) / (self.g_max - self.g_min);
                (self.g_max - self.g_min) * chi * (gn - (1.0 - fit.lambda))
            }
        }
    }

    pub fn flat(&self, g: f64, phi: f64) -> f64 {
        g - self.sharp(g, phi)
    }
}

/// Decomposes the datum at one `tau` with an operator built for `R_kappa(tau)`.
pub fn decompose_at(
    g: &dyn Fn(f64) -> f64,
    tau: f64,
    ctx: &MilneContext,
    op: &MilneOperator,
    alpha: f64,
) -> Result<TauDecomposition> {
    let delta = ctx.epsilon.powf(alpha);
    match build_auxiliaries(g, ctx.epsilon, alpha) {
        Err(Error::DegenerateDatum) => {
            let (g_min, g_max) = inflow_extremes(g);
            Ok(TauDecomposition {
                tau,
                r_kappa: op.tracer().r_kappa(),
                g_min,
                g_max,
                delta,
                fit: None,
            })
        }
        Err(e) => Err(e),
        Ok(aux) => {
            let fit = find_lambda(&aux, ctx, op)?;
            Ok(TauDecomposition {
                tau,
                r_kappa: op.tracer().r_kappa(),
                g_min: aux.g_min,
                g_max: aux.g_max,
                delta,
                fit: Some(fit),
            })
        }
    }
}

/// `g = g_flat + g_sharp`, tabulated per boundary sample.
#[derive(Debug, Clone)]
pub struct DecomposedDatum {
    pub datum: BoundaryDatum,
    pub alpha: f64,
    pub epsilon: f64,
    pub samples: Vec<TauDecomposition>,
}

impl DecomposedDatum {
    pub fn n_tau(&self) -> usize {
        self.samples.len()
    }

    pub fn g(&self, k: usize, phi: f64) -> f64 {
        self.datum.eval(self.samples[k].tau, phi)
    }

    pub fn g_sharp(&self, k: usize, phi: f64) -> f64 {
        self.samples[k].sharp(self.g(k, phi), phi)
    }

    pub fn g_flat(&self, k: usize, phi: f64) -> f64 {
        self.samples[k].flat(self.g(k, phi), phi)
    }

    pub fn lambdas(&self) -> Vec<Option<f64>> {
        self.samples.iter().map(|s| s.fit.map(|f| f.lambda)).collect()
    }
}

/// Uniform samples `tau_k = -pi + 2 pi k / n` of the normal angle.
pub fn tau_samples(n: usize) -> Vec<f64> {
    (0..n).map(|k| -PI + 2.0 * PI * k as f64 / n as f64).collect()
}

/// Builds one operator per distinct radius of curvature.
pub fn operators_for(ctx: &MilneContext, radii: &[f64]) -> Result<Vec<Arc<MilneOperator>>> {
    let mut unique: Vec<(u64, Arc<MilneOperator>)> = Vec::new();
    let mut out = Vec::with_capacity(radii.len());
    for &r in radii {
        let key = r.to_bits();
        if let Some((_, op)) = unique.iter().find(|(k, _)| *k == key) {
            out.push(op.clone());
        } else {
            let op = Arc::new(ctx.operator(r)?);
            unique.push((key, op.clone()));
            out.push(op);
        }
    }
    Ok(out)
}

pub fn decompose(
    g: &BoundaryDatum,
    boundary: &ConvexBoundary,
    ctx: &MilneContext,
    alpha: f64,
    n_tau: usize,
) -> Result<DecomposedDatum> {
    let taus = tau_samples(n_tau);
    let radii: Vec<f64> = taus.iter().map(|&t| boundary.radius_of_curvature_at_tau(t)).collect();
    let ops = operators_for(ctx, &radii)?;
    decompose_with(g, ctx, alpha, &taus, &ops)
}

pub fn decompose_with(
    g: &BoundaryDatum,
    ctx: &MilneContext,
    alpha: f64,
    taus: &[f64],
    ops: &[Arc<MilneOperator>],
) -> Result<DecomposedDatum> {
    let samples = taus
        .par_iter()
        .zip(ops.par_iter())
        .map(|(&tau, op)| {
            let gt = g.at_tau(tau);
            decompose_at(&gt, tau, ctx, op, alpha)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DecomposedDatum {
        datum: g.clone(),
        alpha,
        epsilon: ctx.epsilon,
        samples,
    })
}

/// `max |df/d eta (0, phi)|` over the nodes nearest each grazing
/// direction, divided by the median of `|df/d eta (0, phi)|` over nodes
/// with `|sin phi| >= 2 delta`.
pub fn grazing_derivative_ratio(sol: &MilneSolution, delta: f64) -> f64 {
    let d = weighted_derivatives(sol);
    let np = sol.phi.len();
    let nodes = sol.phi.nodes();
    let row = &d.deta[0..np];
    // Nodes adjacent to phi = 0 and phi = +-pi.
    let mut grazing = [0usize, np / 2 - 1, np / 2, np - 1];
    grazing.sort_unstable();
    let peak = grazing.iter().map(|&j| row[j].abs()).fold(0.0, f64::max);
    let mut interior: Vec<f64> = (0..np)
        .filter(|&j| nodes[j].sin().abs() >= 2.0 * delta)
        .map(|j| row[j].abs())
        .collect();
    if interior.is_empty() {
        return f64::NAN;
    }
    interior.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = interior[interior.len() / 2];
    peak / median
}
