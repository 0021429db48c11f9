//! Steady transport `eps w . grad u + u - u_bar = f` on a convex domain,
//! solved in mild form along backward characteristics.
//!
//! Along `p(t) = x - eps t w`,
//! `u(x, w) = h(p(t_b), w) e^{-t_b} + int_0^{t_b} (f + u_bar)(p(t)) e^{-t} dt`,
//! so the angular average satisfies `u_bar = b + A u_bar` with `A` a
//! nonnegative averaging operator. `u_bar` is interpolated on a polar mesh;
//! the reduced system is solved directly (block-circulant on the disk,
//! dense LU otherwise) or by an accelerated fixed point.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::anderson::{self, FixedPointConfig};
use crate::decomposition::BoundaryDatum;
use crate::discretization::{Ordinates, SpatialMesh};
use crate::error::{Error, Result};
use crate::geometry::{phi_from_velocity, ConvexBoundary, Vec2};

/// Rays are truncated at this optical depth.
pub const MAX_OPTICAL_DEPTH: f64 = 36.0;
/// Largest panel in optical depth.
const MAX_PANEL: f64 = 1.0;
const GL2: f64 = 0.577_350_269_189_625_8;

pub type SourceFn = Arc<dyn Fn(Vec2, Vec2) -> f64 + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExitRecord {
    pub t_b: f64,
    pub hit_point: Vec2,
    pub hit_tau: f64,
}

/// Backward exit time: smallest `t >= 0` with `x - eps t w` on the boundary.
pub fn exit_time(boundary: &ConvexBoundary, x: Vec2, w: Vec2, epsilon: f64) -> Result<ExitRecord> {
    let s = exit_distance(boundary, x, w)?;
    let hit = x - s * w;
    let theta = hit.y.atan2(hit.x);
    Ok(ExitRecord {
        t_b: s / epsilon,
        hit_point: hit,
        hit_tau: boundary.tau(theta),
    })
}

/// Physical distance to the boundary along `-w`.
fn exit_distance(boundary: &ConvexBoundary, x: Vec2, w: Vec2) -> Result<f64> {
    if boundary.is_disk() {
        let r = boundary.cosine_coefficients()[0];
        let xw = x.dot(&w);
        let c = x.norm_squared() - r * r;
        if c >= -1e-14 * r * r {
            let th = x.y.atan2(x.x);
            let wn = w.dot(&boundary.normal(th));
            if wn.abs() < 1e-12 {
                return Err(Error::DegenerateRay);
            }
            if wn < 0.0 {
                return Ok(0.0);
            }
        }
        let disc = (xw * xw - c).max(0.0);
        return Ok((xw + disc.sqrt()).max(0.0));
    }
    let f = |s: f64| {
        let p = x - s * w;
        p.norm() - boundary.radius(p.y.atan2(p.x))
    };
    if boundary.scaled_radius(x) >= 1.0 - 1e-13 {
        let th = x.y.atan2(x.x);
        let wn = w.dot(&boundary.normal(th));
        if wn.abs() < 1e-12 {
            return Err(Error::DegenerateRay);
        }
        if wn < 0.0 {
            return Ok(0.0);
        }
    }
    // Bracket with the circumscribed circle, then safeguarded Newton.
    let rm = boundary.r_max() * (1.0 + 1e-9);
    let xw = x.dot(&w);
    let mut hi = xw + (xw * xw - x.norm_squared() + rm * rm).max(0.0).sqrt();
    let mut lo = 0.0;
    if f(hi) <= 0.0 {
        return Ok(hi);
    }
    let mut s = 0.5 * (lo + hi);
    for _ in 0..100 {
        let p = x - s * w;
        let rho = p.norm();
        let th = p.y.atan2(p.x);
        let (r, dr, _) = boundary.radius_derivatives(th);
        let v = rho - r;
        if v <= 0.0 {
            lo = s;
        } else {
            hi = s;
        }
        let drho = -p.dot(&w) / rho;
        let dth = (-p.x * w.y + p.y * w.x) / (rho * rho);
        let d = drho - dr * dth;
        let mut next = s - v / d;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - s).abs() <= 1e-15 * (1.0 + s) || hi - lo <= 1e-15 * (1.0 + s) {
            return Ok(next);
        }
        s = next;
    }
    Ok(s)
}

/// Visits 2-point Gauss panels on `[0, min(t_b, MAX_OPTICAL_DEPTH)]` along
/// `x - eps t w`, with weights normalised so that each panel carries its
/// exact mass `e^{-t_a} - e^{-t_b}`.
fn ray_quadrature(mesh: &SpatialMesh, epsilon: f64, x: Vec2, w: Vec2, t_b: f64, mut visit: impl FnMut(Vec2, f64)) {
    let t_end = t_b.min(MAX_OPTICAL_DEPTH);
    let dtheta = 2.0 * PI / mesh.n_theta() as f64;
    let s0 = mesh.rings()[0];
    let mut t = 0.0;
    while t < t_end {
        let p = x - epsilon * t * w;
        let (s, th) = mesh.polar(p);
        let r = mesh.boundary().radius(th);
        // Rays start on rings; take the finer neighbour so that the panel
        // sequence does not depend on rounding of `s`.
        let radial = mesh
            .local_spacing((s * (1.0 - 1e-9)).min(1.0))
            .min(mesh.local_spacing((s * (1.0 + 1e-9)).min(1.0)))
            * r;
        let angular = s.max(s0) * r * dtheta;
        let mut dt = (radial.min(angular) / epsilon).min(MAX_PANEL);
        if t + dt > t_end || t_end - (t + dt) < 0.25 * dt {
            dt = t_end - t;
        }
        let mass = (-t).exp() * -(-dt).exp_m1();
        let ta = t + 0.5 * dt * (1.0 - GL2);
        let tb = t + 0.5 * dt * (1.0 + GL2);
        let (ea, eb) = ((-(ta - t)).exp(), (-(tb - t)).exp());
        let norm = mass / (ea + eb);
        visit(x - epsilon * ta * w, norm * ea);
        visit(x - epsilon * tb * w, norm * eb);
        t += dt;
    }
}

/// Data and geometry of one transport problem.
#[derive(Clone)]
pub struct TransportProblem {
    pub boundary: ConvexBoundary,
    pub epsilon: f64,
    pub h: BoundaryDatum,
    pub f: Option<SourceFn>,
}

impl std::fmt::Debug for TransportProblem {
    fn fmt(&self, fm: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        fm.debug_struct("TransportProblem")
            .field("boundary", &self.boundary)
            .field("epsilon", &self.epsilon)
            .field("has_source", &self.f.is_some())
            .finish()
    }
}

impl TransportProblem {
    pub fn new(boundary: ConvexBoundary, epsilon: f64, h: BoundaryDatum) -> Self {
        Self {
            boundary,
            epsilon,
            h,
            f: None,
        }
    }

    pub fn with_source(mut self, f: SourceFn) -> Self {
        self.f = Some(f);
        self
    }

    fn inflow_value(&self, x: Vec2, w: Vec2) -> Result<(f64, f64)> {
        let e = match exit_time(&self.boundary, x, w, self.epsilon) {
            Ok(e) => e,
            Err(Error::DegenerateRay) => {
                let th = x.y.atan2(x.x);
                ExitRecord {
                    t_b: 0.0,
                    hit_point: x,
                    hit_tau: self.boundary.tau(th),
                }
            }
            Err(e) => return Err(e),
        };
        let phi = phi_from_velocity(e.hit_tau, w);
        Ok((e.t_b, self.h.eval(e.hit_tau, phi)))
    }
}

/// Mesh and ordinates.
#[derive(Debug, Clone)]
pub struct TransportGrids {
    pub mesh: SpatialMesh,
    pub ordinates: Ordinates,
}

impl TransportGrids {
    pub fn new(boundary: &ConvexBoundary, epsilon: f64, resolution: usize, n_ordinates: usize) -> Result<Self> {
        Ok(Self {
            mesh: SpatialMesh::new(boundary, epsilon, resolution)?,
            ordinates: Ordinates::new(n_ordinates)?,
        })
    }

    /// Mesh refined once and twice as many ordinates.
    pub fn refined(&self) -> Result<Self> {
        Ok(Self {
            mesh: self.mesh.refined(),
            ordinates: Ordinates::new(2 * self.ordinates.len())?,
        })
    }

    fn rotationally_symmetric(&self) -> bool {
        self.mesh.boundary().is_disk() && self.ordinates.len().is_multiple_of(self.mesh.n_theta())
    }
}

/// `u(x_i, w_j)`, node-major: `values[i * n_ordinates + j]`.
#[derive(Debug, Clone)]
pub struct PhaseField {
    pub epsilon: f64,
    pub n_ordinates: usize,
    pub values: Vec<f64>,
    pub mean: Vec<f64>,
}

impl PhaseField {
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_ordinates + j]
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_ordinates..(i + 1) * self.n_ordinates]
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Per-node precomputed exit data.
struct NodeRays {
    t_b: Vec<f64>,
    inflow: Vec<f64>,
}

fn node_rays(problem: &TransportProblem, grids: &TransportGrids, i: usize) -> Result<NodeRays> {
    let x = grids.mesh.nodes()[i];
    let m = grids.ordinates.len();
    let mut t_b = Vec::with_capacity(m);
    let mut inflow = Vec::with_capacity(m);
    for j in 0..m {
        let (t, h) = problem.inflow_value(x, grids.ordinates.velocity(j))?;
        t_b.push(t);
        inflow.push(h);
    }
    Ok(NodeRays { t_b, inflow })
}

/// One Duhamel application with a frozen `u_bar`: returns `u` at every
/// node and ordinate.
pub fn sweep(problem: &TransportProblem, grids: &TransportGrids, ubar: &[f64]) -> Result<PhaseField> {
    sweep_at(problem, grids, ubar, grids.mesh.nodes(), &grids.ordinates)
}

/// Duhamel application at arbitrary points and ordinates, with `u_bar`
/// given on (and interpolated from) `grids.mesh`.
pub fn sweep_at(
    problem: &TransportProblem,
    grids: &TransportGrids,
    ubar: &[f64],
    points: &[Vec2],
    ordinates: &Ordinates,
) -> Result<PhaseField> {
    let mesh = &grids.mesh;
    let m = ordinates.len();
    let rows = points
        .par_iter()
        .map(|&x| {
            let mut st = Vec::with_capacity(4 + mesh.n_theta());
            (0..m)
                .map(|j| {
                    let w = ordinates.velocity(j);
                    let (t_b, h) = problem.inflow_value(x, w)?;
                    let mut v = h * (-t_b).exp();
                    ray_quadrature(mesh, problem.epsilon, x, w, t_b, |p, wt| {
                        st.clear();
                        mesh.stencil(p, &mut st);
                        let mut q: f64 = st.iter().map(|&(k, a)| a * ubar[k]).sum();
                        if let Some(f) = &problem.f {
                            q += f(p, w);
                        }
                        v += wt * q;
                    });
                    Ok(v)
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    let mean = rows.iter().map(|r| ordinates.average(r)).collect();
    Ok(PhaseField {
        epsilon: problem.epsilon,
        n_ordinates: m,
        values: rows.concat(),
        mean,
    })
}

/// `b = mean_w [h e^{-t_b} + int f e^{-t}]` at every node.
fn reduced_rhs(problem: &TransportProblem, grids: &TransportGrids) -> Result<Vec<f64>> {
    let mesh = &grids.mesh;
    (0..mesh.len())
        .into_par_iter()
        .map(|i| {
            let rays = node_rays(problem, grids, i)?;
            let x = mesh.nodes()[i];
            let vals: Vec<f64> = (0..grids.ordinates.len())
                .map(|j| {
                    let w = grids.ordinates.velocity(j);
                    let mut v = rays.inflow[j] * (-rays.t_b[j]).exp();
                    if let Some(f) = &problem.f {
                        ray_quadrature(mesh, problem.epsilon, x, w, rays.t_b[j], |p, wt| v += wt * f(p, w));
                    }
                    v
                })
                .collect();
            Ok(grids.ordinates.average(&vals))
        })
        .collect()
}

/// Row `i` of the averaging operator `A`.
fn operator_row(problem: &TransportProblem, grids: &TransportGrids, i: usize) -> Result<Vec<f64>> {
    let mesh = &grids.mesh;
    let x = mesh.nodes()[i];
    let mut row = vec![0.0; mesh.len()];
    let mut st = Vec::with_capacity(4 + mesh.n_theta());
    let m = grids.ordinates.len();
    for j in 0..m {
        let w = grids.ordinates.velocity(j);
        let t_b = match exit_time(&problem.boundary, x, w, problem.epsilon) {
            Ok(e) => e.t_b,
            Err(Error::DegenerateRay) => 0.0,
            Err(e) => return Err(e),
        };
        let c = grids.ordinates.weights()[j] / (2.0 * PI);
        ray_quadrature(mesh, problem.epsilon, x, w, t_b, |p, wt| {
            st.clear();
            mesh.stencil(p, &mut st);
            for &(k, a) in &st {
                row[k] += c * wt * a;
            }
        });
    }
    Ok(row)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransportMethod {
    /// Circulant on the disk, dense below the size limit, iterative otherwise.
    #[default]
    Auto,
    Circulant,
    Dense,
    Iterative,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransportConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub method: TransportMethod,
    pub dense_limit: usize,
    pub anderson_window: usize,
}

impl Default for TransportConfig {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iter: 2000,
            method: TransportMethod::Auto,
            dense_limit: 3000,
            anderson_window: 5,
        }
    }
}

/// Converged angular average on the mesh.
#[derive(Debug, Clone)]
pub struct TransportSolution {
    pub grids: TransportGrids,
    pub epsilon: f64,
    pub mean: Vec<f64>,
    pub iterations: usize,
    /// `sup |u_bar - (b + A u_bar)|`.
    pub residual: f64,
    pub method: TransportMethod,
}

/// Solves the reduced system for `u_bar`.
pub fn solve_mean(problem: &TransportProblem, grids: &TransportGrids, cfg: &TransportConfig) -> Result<TransportSolution> {
    if !(problem.epsilon > 0.0) {
        return Err(Error::InvalidInput(format!("epsilon = {}", problem.epsilon)));
    }
    let n = grids.mesh.len();
    let method = match cfg.method {
        TransportMethod::Auto if grids.rotationally_symmetric() => TransportMethod::Circulant,
        TransportMethod::Auto if n <= cfg.dense_limit => TransportMethod::Dense,
        TransportMethod::Auto => TransportMethod::Iterative,
        TransportMethod::Circulant if !grids.rotationally_symmetric() => {
            return Err(Error::InvalidInput(
                "circulant solver needs the disk and ordinates divisible by sectors".into(),
            ))
        }
        m => m,
    };
    let b = reduced_rhs(problem, grids)?;
    let (mean, iterations, residual) = match method {
        TransportMethod::Circulant => {
            let blocks = CirculantBlocks::assemble(problem, grids)?;
            let q = blocks.solve(&b)?;
            let aq = blocks.apply(&q);
            (q.clone(), 1, sup_diff(&q, &add(&b, &aq)))
        }
        TransportMethod::Dense => {
            let rows = (0..n)
                .into_par_iter()
                .map(|i| operator_row(problem, grids, i))
                .collect::<Result<Vec<_>>>()?;
            let a = DMatrix::from_fn(n, n, |i, k| rows[i][k]);
            let lhs = DMatrix::identity(n, n) - &a;
            let q = lhs
                .lu()
                .solve(&DVector::from_column_slice(&b))
                .ok_or(Error::NoConvergence {
                    what: "dense transport system",
                    iterations: 0,
                    residual: f64::INFINITY,
                })?;
            let aq = &a * &q;
            let q = q.as_slice().to_vec();
            let r = sup_diff(&q, &add(&b, aq.as_slice()));
            (q, 1, r)
        }
        TransportMethod::Iterative | TransportMethod::Auto => {
            let zero = TransportProblem {
                h: BoundaryDatum::constant(0.0),
                f: None,
                ..problem.clone()
            };
            let fp = FixedPointConfig {
                tol: cfg.tol,
                max_iter: cfg.max_iter,
                damping: 1.0,
                window: cfg.anderson_window,
            };
            let mut failure = None;
            let out = anderson::solve(
                "transport source iteration",
                b.clone(),
                |q| match sweep(&zero, grids, q) {
                    Ok(s) => add(&b, &s.mean),
                    Err(e) => {
                        failure = Some(e);
                        vec![f64::NAN; q.len()]
                    }
                },
                sup_diff,
                &fp,
            );
            if let Some(e) = failure {
                return Err(e);
            }
            let out = out?;
            (out.x, out.iterations, out.residual)
        }
    };
    if !(residual <= cfg.tol.max(1e-9)) {
        return Err(Error::NoConvergence {
            what: "transport reduced system",
            iterations,
            residual,
        });
    }
    Ok(TransportSolution {
        grids: grids.clone(),
        epsilon: problem.epsilon,
        mean,
        iterations,
        residual,
        method,
    })
}

/// Solves for `u_bar`, then sweeps once more for the full phase field.
pub fn solve_transport(
    problem: &TransportProblem,
    grids: &TransportGrids,
    cfg: &TransportConfig,
) -> Result<(TransportSolution, PhaseField)> {
    let sol = solve_mean(problem, grids, cfg)?;
    let field = sweep(problem, grids, &sol.mean)?;
    Ok((sol, field))
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// On the disk, `A` commutes with rotation by one sector, so it is block
/// circulant: `A[(k, l), (k', l')] = C_{k k'}(l' - l)`. Each Fourier mode
/// in the sector index decouples into an `n_rings x n_rings` system.
struct CirculantBlocks {
    n_rings: usize,
    n_theta: usize,
    /// `hat C(m)` for each mode `m`.
    modes: Vec<DMatrix<Complex64>>,
}

impl CirculantBlocks {
    fn assemble(problem: &TransportProblem, grids: &TransportGrids) -> Result<Self> {
        let mesh = &grids.mesh;
        let (nr, nt) = (mesh.n_rings(), mesh.n_theta());
        let rows = (0..nr)
            .into_par_iter()
            .map(|k| operator_row(problem, grids, mesh.index(k, 0)))
            .collect::<Result<Vec<_>>>()?;
        let mut planner = FftPlanner::new();
        let inv = planner.plan_fft_inverse(nt);
        let mut modes = vec![DMatrix::zeros(nr, nr); nt];
        let mut buf = vec![Complex64::new(0.0, 0.0); nt];
        for (k, row) in rows.iter().enumerate() {
            for kp in 0..nr {
                for d in 0..nt {
                    buf[d] = Complex64::new(row[mesh.index(kp, d)], 0.0);
                }
                // sum_d C(d) e^{+2 pi i m d / n}
                inv.process(&mut buf);
                for (m, v) in buf.iter().enumerate() {
                    modes[m][(k, kp)] = *v;
                }
            }
        }
        Ok(Self {
            n_rings: nr,
            n_theta: nt,
            modes,
        })
    }

    fn forward(&self, v: &[f64]) -> Vec<Vec<Complex64>> {
        let fwd = FftPlanner::new().plan_fft_forward(self.n_theta);
        (0..self.n_rings)
            .map(|k| {
                let mut buf: Vec<Complex64> = v[k * self.n_theta..(k + 1) * self.n_theta]
                    .iter()
                    .map(|&x| Complex64::new(x, 0.0))
                    .collect();
                fwd.process(&mut buf);
                buf
            })
            .collect()
    }

    fn backward(&self, hat: Vec<Vec<Complex64>>) -> Vec<f64> {
        let inv = FftPlanner::new().plan_fft_inverse(self.n_theta);
        let scale = 1.0 / self.n_theta as f64;
        let mut out = vec![0.0; self.n_rings * self.n_theta];
        for (k, mut buf) in hat.into_iter().enumerate() {
            inv.process(&mut buf);
            for (l, z) in buf.iter().enumerate() {
                out[k * self.n_theta + l] = z.re * scale;
            }
        }
        out
    }

    /// Solves `(I - A) q = b`.
    fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let bh = self.forward(b);
        let nr = self.n_rings;
        let sols = (0..self.n_theta)
            .into_par_iter()
            .map(|m| {
                let lhs = DMatrix::<Complex64>::identity(nr, nr) - &self.modes[m];
                let rhs = DVector::from_iterator(nr, (0..nr).map(|k| bh[k][m]));
                lhs.lu().solve(&rhs).ok_or(Error::NoConvergence {
                    what: "circulant transport block",
                    iterations: 0,
                    residual: f64::INFINITY,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let hat = (0..nr).map(|k| (0..self.n_theta).map(|m| sols[m][k]).collect()).collect();
        Ok(self.backward(hat))
    }

    fn apply(&self, q: &[f64]) -> Vec<f64> {
        let qh = self.forward(q);
        let nr = self.n_rings;
        let mut out = vec![vec![Complex64::new(0.0, 0.0); self.n_theta]; nr];
        for m in 0..self.n_theta {
            let v = DVector::from_iterator(nr, (0..nr).map(|k| qh[k][m]));
            let r = &self.modes[m] * v;
            for k in 0..nr {
                out[k][m] = r[k];
            }
        }
        self.backward(out)
    }
}

/// Result of a three-level refinement study of `u_bar`.
#[derive(Debug, Clone)]
pub struct SelfConvergence {
    /// `L2` differences at the coarse nodes: levels (0, 1) and (1, 2).
    pub differences: [f64; 2],
    /// `differences[0] / differences[1]`.
    pub ratio: f64,
    pub levels: Vec<TransportSolution>,
}

impl SelfConvergence {
    /// Differences shrink under refinement.
    pub fn is_converging(&self) -> bool {
        self.ratio >= 1.0
    }

    /// Successive differences shrink by `1/4 ..= 3/4` per refinement.
    pub fn halves(&self) -> bool {
        (4.0 / 3.0..=4.0).contains(&self.ratio)
    }
}

pub fn self_convergence(
    problem: &TransportProblem,
    grids: &TransportGrids,
    cfg: &TransportConfig,
) -> Result<SelfConvergence> {
    let g1 = grids.refined()?;
    let g2 = g1.refined()?;
    let levels = [grids, &g1, &g2]
        .into_iter()
        .map(|g| solve_mean(problem, g, cfg))
        .collect::<Result<Vec<_>>>()?;
    let coarse = &grids.mesh;
    let idx1 = g1
        .mesh
        .nested_indices(coarse)
        .ok_or_else(|| Error::InvalidGrid("meshes are not nested".into()))?;
    let idx2 = g2
        .mesh
        .nested_indices(coarse)
        .ok_or_else(|| Error::InvalidGrid("meshes are not nested".into()))?;
    let w = coarse.weights();
    let l2 = |a: &dyn Fn(usize) -> f64, b: &dyn Fn(usize) -> f64| {
        (0..coarse.len())
            .map(|i| w[i] * (a(i) - b(i)).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    let d01 = l2(&|i| levels[0].mean[i], &|i| levels[1].mean[idx1[i]]);
    let d12 = l2(&|i| levels[1].mean[idx1[i]], &|i| levels[2].mean[idx2[i]]);
    Ok(SelfConvergence {
        differences: [d01, d12],
        ratio: d01 / d12,
        levels,
    })
}
