//! The half-space (Milne) problem with geometric correction
//!
//! ```text
//! sin(phi) df/d eta + F(eta) cos(phi) df/d phi + f - f_bar = S,
//! f(0, phi) = h(phi)  for sin(phi) > 0,
//! f(L, phi) = f(L, -phi),
//! ```
//!
//! with `F(eta) = -eps / (R_kappa - eps eta)` and `L = eps^{-1/2}`, solved
//! through its mild formulation `f = K[h] + T[f_bar + S]`. Because the
//! unknown of the fixed point is only `f_bar(eta)`, the iteration runs on
//! the `eta` nodes and the full field is assembled once at the end.

mod diagnostics;
mod operator;
mod tracer;

pub use diagnostics::{
    decay_profile, extract_f_l, fit_decay_amplitude, flux, flux_profile, grazing_eta_derivative_sup,
    weighted_derivatives, WeightedDerivatives,
};
pub use operator::{MeanInterpolation, MilneOperator};
pub use tracer::{
    adaptive_simpson, CharacteristicTracer, PathEnd, PathPanel, PathSample, Region, TraceResult,
    MAX_DEPTH,
};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::anderson::{self, FixedPointConfig};
use crate::discretization::{EtaGrading, EtaGrid, PhiGrid};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MilneProblem {
    pub epsilon: f64,
    pub r_kappa: f64,
    pub length: f64,
    pub geometric_correction: bool,
}

impl MilneProblem {
    /// Problem with geometric correction and `L = epsilon^{-1/2}`.
    pub fn new(epsilon: f64, r_kappa: f64) -> Result<Self> {
        let p = Self {
            epsilon,
            r_kappa,
            length: epsilon.powf(-0.5),
            geometric_correction: true,
        };
        p.validate()?;
        Ok(p)
    }

    /// Flat problem (`F = 0`) on the same length.
    pub fn flat(epsilon: f64) -> Result<Self> {
        let p = Self {
            epsilon,
            r_kappa: 1.0,
            length: epsilon.powf(-0.5),
            geometric_correction: false,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) || !(self.length > 0.0) || !(self.r_kappa > 0.0) {
            return Err(Error::InvalidInput(format!("invalid Milne problem {self:?}")));
        }
        if self.geometric_correction && self.epsilon * self.length >= self.r_kappa {
            return Err(Error::InvalidInput(format!(
                "epsilon L = {} >= R_kappa = {}",
                self.epsilon * self.length,
                self.r_kappa
            )));
        }
        Ok(())
    }

    pub fn tracer(&self) -> Result<CharacteristicTracer> {
        if self.geometric_correction {
            CharacteristicTracer::new(self.epsilon, self.r_kappa, self.length)
        } else {
            Ok(CharacteristicTracer::flat(self.length))
        }
    }

    pub fn force(&self, eta: f64) -> f64 {
        if self.geometric_correction {
            -self.epsilon / (self.r_kappa - self.epsilon * eta)
        } else {
            0.0
        }
    }
}

/// Grid sizes for the half-space solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MilneGridSpec {
    pub n_eta: usize,
    pub n_phi: usize,
    pub grading: EtaGrading,
    pub clustering: bool,
}

impl Default for MilneGridSpec {
    fn default() -> Self {
        Self {
            n_eta: 65,
            n_phi: 64,
            grading: EtaGrading::Geometric,
            clustering: true,
        }
    }
}

impl MilneGridSpec {
    pub fn doubled(&self) -> Self {
        Self {
            n_eta: 2 * self.n_eta - 1,
            n_phi: 2 * self.n_phi,
            ..*self
        }
    }

    pub fn grids(&self, problem: &MilneProblem) -> Result<(EtaGrid, PhiGrid)> {
        let eta = EtaGrid::with_length(problem.length, problem.epsilon, self.n_eta, self.grading)?;
        let phi = if self.clustering {
            PhiGrid::clustered(self.n_phi)?
        } else {
            PhiGrid::uniform(self.n_phi)?
        };
        Ok((eta, phi))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MilneMethod {
    /// Damped fixed point on `f_bar`, optionally Anderson-accelerated.
    #[default]
    FixedPoint,
    /// LU solve of the reduced system `(I - P) q = b`.
    Direct,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MilneSolverConfig {
    pub iteration: FixedPointConfig,
    pub method: MilneMethod,
}

impl Default for MilneSolverConfig {
    fn default() -> Self {
        Self {
            iteration: FixedPointConfig::default(),
            method: MilneMethod::FixedPoint,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MilneSolution {
    pub problem: MilneProblem,
    pub eta: EtaGrid,
    pub phi: PhiGrid,
    /// Row-major: `values[i * n_phi + j] = f(eta_i, phi_j)`.
    pub values: Vec<f64>,
    /// Angular averages `f_bar(eta_i)`.
    pub mean: Vec<f64>,
    pub f_l: f64,
    pub iterations: usize,
    pub residual: f64,
}

impl MilneSolution {
    pub fn n_phi(&self) -> usize {
        self.phi.len()
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.phi.len() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let np = self.phi.len();
        &self.values[i * np..(i + 1) * np]
    }

    /// Bilinear interpolation; `eta` is clamped to `[0, L]`.
    pub fn interpolate(&self, eta: f64, phi: f64) -> f64 {
        let eta = eta.clamp(0.0, self.eta.length());
        let k = self.eta.locate(eta);
        let (a, b) = (self.eta.nodes()[k], self.eta.nodes()[k + 1]);
        let t = ((eta - a) / (b - a)).clamp(0.0, 1.0);
        let lo = self.phi.interpolate(self.row(k), phi);
        let hi = self.phi.interpolate(self.row(k + 1), phi);
        (1.0 - t) * lo + t * hi
    }

    /// Same grids, values shifted by a constant.
    pub fn shifted(&self, c: f64) -> Self {
        let mut s = self.clone();
        s.values.iter_mut().for_each(|v| *v += c);
        s.mean.iter_mut().for_each(|v| *v += c);
        s.f_l += c;
        s
    }
}

/// Everything needed to pose and solve half-space problems at a given
/// Knudsen number, for any radius of curvature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MilneContext {
    pub epsilon: f64,
    pub grids: MilneGridSpec,
    pub solver: MilneSolverConfig,
    pub interpolation: MeanInterpolation,
    pub geometric_correction: bool,
}

impl MilneContext {
    pub fn new(epsilon: f64, grids: MilneGridSpec) -> Self {
        Self {
            epsilon,
            grids,
            solver: MilneSolverConfig::default(),
            interpolation: MeanInterpolation::Linear,
            geometric_correction: true,
        }
    }

    pub fn problem(&self, r_kappa: f64) -> Result<MilneProblem> {
        if self.geometric_correction {
            MilneProblem::new(self.epsilon, r_kappa)
        } else {
            MilneProblem::flat(self.epsilon)
        }
    }

    pub fn operator(&self, r_kappa: f64) -> Result<MilneOperator> {
        let problem = self.problem(r_kappa)?;
        let (eta, phi) = self.grids.grids(&problem)?;
        Ok(MilneOperator::with_interpolation(
            problem.tracer()?,
            eta,
            phi,
            self.interpolation,
        ))
    }

    pub fn solve(
        &self,
        op: &MilneOperator,
        h: &dyn Fn(f64) -> f64,
        source: Option<&[f64]>,
    ) -> Result<MilneSolution> {
        let problem = self.problem(op.tracer().r_kappa())?;
        solve_with(op, &problem, h, source, &self.solver)
    }
}

/// Solves one problem: builds the operator and calls [`solve_with`].
pub fn solve_milne(
    problem: &MilneProblem,
    grids: &MilneGridSpec,
    h: &dyn Fn(f64) -> f64,
    source: Option<&[f64]>,
    cfg: &MilneSolverConfig,
) -> Result<MilneSolution> {
    problem.validate()?;
    let (eta, phi) = grids.grids(problem)?;
    let op = MilneOperator::new(problem.tracer()?, eta, phi);
    solve_with(&op, problem, h, source, cfg)
}

/// Solves `f = K[h] + T[f_bar + S]` with a prebuilt operator. `source`, if
/// given, is a nodal field on the operator's grid.
pub fn solve_with(
    op: &MilneOperator,
    problem: &MilneProblem,
    h: &dyn Fn(f64) -> f64,
    source: Option<&[f64]>,
    cfg: &MilneSolverConfig,
) -> Result<MilneSolution> {
    let ne = op.eta().len();
    let np = op.phi().len();
    let mut base = op.apply_k(h);
    if let Some(s) = source {
        if s.len() != ne * np {
            return Err(Error::InvalidInput(format!(
                "source has {} values, grid has {}",
                s.len(),
                ne * np
            )));
        }
        for (b, t) in base.iter_mut().zip(op.apply_t(s)) {
            *b += t;
        }
    }
    let b = op.average_rows(&base);
    let p = op.reduced();

    let (q, iterations, residual) = match cfg.method {
        MilneMethod::Direct => {
            let a = DMatrix::identity(ne, ne) - p;
            let q = a
                .lu()
                .solve(&DVector::from_column_slice(&b))
                .ok_or(Error::NoConvergence {
                    what: "reduced Milne system",
                    iterations: 0,
                    residual: f64::INFINITY,
                })?;
            let q = q.as_slice().to_vec();
            let gq = apply_reduced(p, &b, &q);
            let res = field_residual(op, &q, &gq);
            (q, 1, res)
        }
        MilneMethod::FixedPoint => {
            let q0 = vec![inflow_mean(op.phi(), h); ne];
            let out = anderson::solve(
                "Milne fixed point",
                q0,
                |q| apply_reduced(p, &b, q),
                |q, gq| field_residual(op, q, gq),
                &cfg.iteration,
            )?;
            (out.x, out.iterations, out.residual)
        }
    };

    let tq = op.apply_t_mean(&q);
    let values: Vec<f64> = base.iter().zip(&tq).map(|(a, b)| a + b).collect();
    let mut sol = MilneSolution {
        problem: *problem,
        eta: op.eta().clone(),
        phi: op.phi().clone(),
        mean: q,
        values,
        f_l: 0.0,
        iterations,
        residual,
    };
    sol.f_l = extract_f_l(&sol);
    Ok(sol)
}

fn apply_reduced(p: &DMatrix<f64>, b: &[f64], q: &[f64]) -> Vec<f64> {
    let pq = p * DVector::from_column_slice(q);
    b.iter().zip(pq.iter()).map(|(x, y)| x + y).collect()
}

/// Sup-norm change of the full field `f` produced by the update `q -> G q`.
fn field_residual(op: &MilneOperator, q: &[f64], gq: &[f64]) -> f64 {
    let d: Vec<f64> = gq.iter().zip(q).map(|(a, b)| a - b).collect();
    let dv = op.kernel() * DVector::from_column_slice(&d);
    dv.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Weighted average of `h` over the in-flow half of the grid.
pub fn inflow_mean(phi: &PhiGrid, h: &dyn Fn(f64) -> f64) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (p, w) in phi.nodes().iter().zip(phi.weights()) {
        if p.sin() > 0.0 {
            num += w * h(*p);
            den += w;
        }
    }
    num / den
}

/// Sampled extremes of `h` over `sin phi > 0`.
pub fn inflow_range(h: &dyn Fn(f64) -> f64, samples: usize) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for k in 0..=samples {
        let p = std::f64::consts::PI * (k as f64 + 0.5) / (samples + 1) as f64;
        let v = h(p);
        lo = lo.min(v);
        hi = hi.max(v);
    }
    (lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn spec() -> MilneGridSpec {
        MilneGridSpec {
            n_eta: 33,
            n_phi: 32,
            ..Default::default()
        }
    }

    #[test]
    fn constant_data() {
        let p = MilneProblem::new(0.1, 1.0).unwrap();
        let s = solve_milne(&p, &spec(), &|_| 2.5, None, &MilneSolverConfig::default()).unwrap();
        assert!(s.values.iter().all(|v| (v - 2.5).abs() < 1e-12));
        assert!((s.f_l - 2.5).abs() < 1e-12);
        assert_eq!(s.iterations, 1);
    }

    #[test]
    fn maximum_principle_and_specular() {
        let p = MilneProblem::new(0.1, 1.0).unwrap();
        let h = |phi: f64| 1.0 + 0.5 * phi.sin();
        let s = solve_milne(&p, &spec(), &h, None, &MilneSolverConfig::default()).unwrap();
        assert!(s.residual <= 1e-10);
        for v in &s.values {
            assert!(*v >= 1.0 - 1e-9 && *v <= 1.5 + 1e-9, "{v}");
        }
        let last = s.eta.len() - 1;
        for j in 0..s.n_phi() {
            let d = s.value(last, j) - s.value(last, s.phi.reflect(j));
            assert!(d.abs() < 1e-10);
        }
    }

    #[test]
    fn direct_and_iterative_agree() {
        let p = MilneProblem::new(0.05, 1.3).unwrap();
        let h = |phi: f64| (2.0 * phi).cos() + phi.sin();
        let a = solve_milne(&p, &spec(), &h, None, &MilneSolverConfig::default()).unwrap();
        let b = solve_milne(
            &p,
            &spec(),
            &h,
            None,
            &MilneSolverConfig {
                method: MilneMethod::Direct,
                ..Default::default()
            },
        )
        .unwrap();
        let d = a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(d < 1e-9, "{d}");
    }

    #[test]
    fn rejects_long_domain() {
        assert!(MilneProblem::new(0.5, 0.6).is_err());
        let mut p = MilneProblem::new(0.1, 1.0).unwrap();
        p.length = 20.0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn flat_problem_runs() {
        let p = MilneProblem::flat(0.1).unwrap();
        let h = |phi: f64| 1.0 + 0.5 * phi.sin();
        let s = solve_milne(&p, &spec(), &h, None, &MilneSolverConfig::default()).unwrap();
        assert!(s.f_l > 1.0 && s.f_l < 1.5);
        let _ = PI;
    }
}
