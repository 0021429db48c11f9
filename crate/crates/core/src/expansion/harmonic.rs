//! Harmonic extensions of periodic boundary data.
//!
//! On a disk the extension of a trigonometric interpolant is written in
//! closed form as the real part of a polynomial in `z / R`. On a general
//! convex boundary the field is a method-of-fundamental-solutions sum
//! `a0 + sum_j a_j log|x - y_j|` with charges on a dilated copy of the
//! boundary, fitted by least squares at collocation points.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Matrix2};
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::geometry::{ConvexBoundary, Vec2};

/// Smallest number of trace samples handed to the Laplace solver.
pub const MIN_TRACE_SAMPLES: usize = 64;
pub const MFS_CHARGES: usize = 56;
pub const MFS_DILATION: f64 = 1.5;
pub const MAX_CONDITION: f64 = 1e12;

/// Uniform samples `v_k = D(tau_k)`, `tau_k = -pi + 2 pi k / n`, and their
/// trigonometric interpolant.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicTable {
    values: Vec<f64>,
    /// `c_m` for `m = 0..=n/2`, Nyquist term included for even `n`.
    coefficients: Vec<Complex64>,
}

impl PeriodicTable {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        if n < 2 {
            return Err(Error::InvalidInput("periodic table needs at least 2 samples".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("periodic table has non-finite samples".into()));
        }
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        FftPlanner::new().plan_fft_forward(n).process(&mut buf);
        // The samples start at tau = -pi, so shift by e^{i m pi}.
        let coefficients = (0..=n / 2)
            .map(|m| {
                let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                buf[m] * sign / n as f64
            })
            .collect();
        Ok(Self { values, coefficients })
    }

    pub fn from_fn(n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new((0..n).map(|k| f(tau_node(k, n))).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Weight of mode `m` in `c0 + sum 2 Re(c_m e^{i m tau})`.
    fn mode_weight(&self, m: usize) -> f64 {
        let n = self.values.len();
        if m == 0 || (n.is_multiple_of(2) && m == n / 2) {
            1.0
        } else {
            2.0
        }
    }

    pub fn eval(&self, tau: f64) -> f64 {
        self.coefficients
            .iter()
            .enumerate()
            .map(|(m, c)| self.mode_weight(m) * (c * Complex64::from_polar(1.0, m as f64 * tau)).re)
            .sum()
    }

    /// Resamples the interpolant on `n` nodes.
    pub fn resampled(&self, n: usize) -> Result<Self> {
        Self::from_fn(n, |t| self.eval(t))
    }
}

pub fn tau_node(k: usize, n: usize) -> f64 {
    -PI + 2.0 * PI * k as f64 / n as f64
}

#[derive(Debug, Clone)]
enum Backend {
    Zero,
    /// `u = Re F(z / R)` with `F(s) = sum_m b_m s^m`.
    Disk { radius: f64, b: Vec<Complex64> },
    Mfs { charges: Vec<Vec2>, constant: f64, weights: Vec<f64> },
}

/// A harmonic function on the domain with a known boundary trace.
#[derive(Debug, Clone)]
pub struct HarmonicField {
    trace: Option<PeriodicTable>,
    backend: Backend,
    /// Largest collocation misfit (0 for the disk backend).
    pub boundary_misfit: f64,
    pub condition: f64,
}

impl HarmonicField {
    pub fn zero() -> Self {
        Self {
            trace: None,
            backend: Backend::Zero,
            boundary_misfit: 0.0,
            condition: 1.0,
        }
    }

    pub fn trace(&self) -> Option<&PeriodicTable> {
        self.trace.as_ref()
    }

    /// Dirichlet datum at normal angle `tau`.
    pub fn trace_at(&self, tau: f64) -> f64 {
        self.trace.as_ref().map_or(0.0, |t| t.eval(tau))
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.backend, Backend::Zero)
    }

    pub fn value(&self, x: Vec2) -> f64 {
        match &self.backend {
            Backend::Zero => 0.0,
            Backend::Disk { radius, b } => {
                let s = Complex64::new(x.x, x.y) / radius;
                horner(b, s).re
            }
            Backend::Mfs { charges, constant, weights } => {
                constant
                    + charges
                        .iter()
                        .zip(weights)
                        .map(|(y, a)| a * (x - y).norm().ln())
                        .sum::<f64>()
            }
        }
    }

    pub fn gradient(&self, x: Vec2) -> Vec2 {
        match &self.backend {
            Backend::Zero => Vec2::zeros(),
            Backend::Disk { radius, b } => {
                let s = Complex64::new(x.x, x.y) / radius;
                let d: Vec<Complex64> = b.iter().enumerate().skip(1).map(|(m, c)| c * m as f64).collect();
                let fp = horner(&d, s) / radius;
                Vec2::new(fp.re, -fp.im)
            }
            Backend::Mfs { charges, weights, .. } => charges.iter().zip(weights).fold(Vec2::zeros(), |acc, (y, a)| {
                let d = x - y;
                acc + d * (a / d.norm_squared())
            }),
        }
    }

    pub fn hessian(&self, x: Vec2) -> Matrix2<f64> {
        match &self.backend {
            Backend::Zero => Matrix2::zeros(),
            Backend::Disk { radius, b } => {
                let s = Complex64::new(x.x, x.y) / radius;
                let d: Vec<Complex64> = b
                    .iter()
                    .enumerate()
                    .skip(2)
                    .map(|(m, c)| c * (m * (m - 1)) as f64)
                    .collect();
                let fpp = horner(&d, s) / (radius * radius);
                Matrix2::new(fpp.re, -fpp.im, -fpp.im, -fpp.re)
            }
            Backend::Mfs { charges, weights, .. } => {
                let mut h = Matrix2::zeros();
                for (y, a) in charges.iter().zip(weights) {
                    let d = x - y;
                    let r2 = d.norm_squared();
                    let r4 = r2 * r2;
                    h[(0, 0)] += a * (r2 - 2.0 * d.x * d.x) / r4;
                    h[(1, 1)] += a * (r2 - 2.0 * d.y * d.y) / r4;
                    let off = -a * 2.0 * d.x * d.y / r4;
                    h[(0, 1)] += off;
                    h[(1, 0)] += off;
                }
                h
            }
        }
    }

    /// Gradient at the boundary point with normal angle `tau`.
    pub fn gradient_at_boundary(&self, boundary: &ConvexBoundary, tau: f64) -> Vec2 {
        self.gradient(boundary.point(boundary.theta_of_tau(tau)))
    }

    /// Five-point discrete Laplacian with spacing `h`.
    pub fn discrete_laplacian(&self, x: Vec2, h: f64) -> f64 {
        let ex = Vec2::new(h, 0.0);
        let ey = Vec2::new(0.0, h);
        (self.value(x + ex) + self.value(x - ex) + self.value(x + ey) + self.value(x - ey) - 4.0 * self.value(x)) / (h * h)
    }
}

fn horner(c: &[Complex64], s: Complex64) -> Complex64 {
    c.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &a| acc * s + a)
}

/// Harmonic extension of the trace `d`.
pub fn solve_laplace_dirichlet(boundary: &ConvexBoundary, d: &PeriodicTable) -> Result<HarmonicField> {
    if d.values().iter().all(|&v| v == 0.0) {
        let mut z = HarmonicField::zero();
        z.trace = Some(d.clone());
        return Ok(z);
    }
    let trace = if d.len() < MIN_TRACE_SAMPLES {
        d.resampled(MIN_TRACE_SAMPLES)?
    } else {
        d.clone()
    };
    if boundary.is_disk() {
        let b = trace
            .coefficients
            .iter()
            .enumerate()
            .map(|(m, c)| c * trace.mode_weight(m))
            .collect();
        return Ok(HarmonicField {
            trace: Some(d.clone()),
            backend: Backend::Disk {
                radius: boundary.cosine_coefficients()[0],
                b,
            },
            boundary_misfit: 0.0,
            condition: 1.0,
        });
    }
    solve_mfs(boundary, d, &trace, MFS_CHARGES)
}

/// Method-of-fundamental-solutions fit with `n_charges` charges.
pub fn solve_mfs(
    boundary: &ConvexBoundary,
    d: &PeriodicTable,
    trace: &PeriodicTable,
    n_charges: usize,
) -> Result<HarmonicField> {
    let n_coll = (2 * n_charges).max(trace.len());
    let charges: Vec<Vec2> = (0..n_charges)
        .map(|j| MFS_DILATION * boundary.point(tau_node(j, n_charges)))
        .collect();
    let coll: Vec<(Vec2, f64)> = (0..n_coll)
        .map(|i| {
            let th = tau_node(i, n_coll) + PI / n_coll as f64;
            (boundary.point(th), trace.eval(boundary.tau(th)))
        })
        .collect();
    let a = DMatrix::from_fn(n_coll, n_charges + 1, |i, j| {
        if j == 0 {
            1.0
        } else {
            (coll[i].0 - charges[j - 1]).norm().ln()
        }
    });
    let rhs = DVector::from_iterator(n_coll, coll.iter().map(|c| c.1));
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let condition = smax / smin;
    if !(condition <= MAX_CONDITION) {
        return Err(Error::IllConditioned { condition });
    }
    let sol = svd
        .solve(&rhs, 0.0)
        .map_err(|e| Error::InvalidInput(format!("collocation solve failed: {e}")))?;
    let fitted = &a * &sol;
    let misfit = (fitted - rhs).amax();
    Ok(HarmonicField {
        trace: Some(d.clone()),
        backend: Backend::Mfs {
            charges,
            constant: sol[0],
            weights: sol.iter().skip(1).copied().collect(),
        },
        boundary_misfit: misfit,
        condition,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn table_interpolates_its_samples() {
        for n in [7, 8, 32] {
            let t = PeriodicTable::from_fn(n, |x| (2.0 * x).cos() + 0.3 * x.sin() + 1.0).unwrap();
            for k in 0..n {
                assert_relative_eq!(t.eval(tau_node(k, n)), t.values()[k], epsilon = 1e-13);
            }
            assert_relative_eq!(t.eval(0.37), (0.74f64).cos() + 0.3 * 0.37f64.sin() + 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn disk_extension_of_cos_tau_is_x1() {
        let b = ConvexBoundary::unit_disk();
        let u = solve_laplace_dirichlet(&b, &PeriodicTable::from_fn(64, f64::cos).unwrap()).unwrap();
        assert!(u.value(Vec2::zeros()).abs() < 1e-14);
        assert_relative_eq!(u.value(Vec2::new(0.5, 0.0)), 0.5, epsilon = 1e-14);
        assert_relative_eq!(u.value(Vec2::new(0.3, -0.4)), 0.3, epsilon = 1e-14);
        let g = u.gradient(Vec2::new(0.2, 0.7));
        assert_relative_eq!(g.x, 1.0, epsilon = 1e-13);
        assert!(g.y.abs() < 1e-13);
        assert!(u.hessian(Vec2::new(0.1, 0.1)).amax() < 1e-13);
    }

    #[test]
    fn disk_second_mode() {
        // x^2 - y^2 has trace cos 2 tau.
        let b = ConvexBoundary::unit_disk();
        let u = solve_laplace_dirichlet(&b, &PeriodicTable::from_fn(64, |t| (2.0 * t).cos()).unwrap()).unwrap();
        let x = Vec2::new(0.3, 0.2);
        assert_relative_eq!(u.value(x), 0.09 - 0.04, epsilon = 1e-14);
        let g = u.gradient(x);
        assert_relative_eq!(g.x, 0.6, epsilon = 1e-13);
        assert_relative_eq!(g.y, -0.4, epsilon = 1e-13);
        let h = u.hessian(x);
        assert_relative_eq!(h[(0, 0)], 2.0, epsilon = 1e-12);
        assert_relative_eq!(h[(1, 1)], -2.0, epsilon = 1e-12);
        assert!(h[(0, 1)].abs() < 1e-12);
    }

    #[test]
    fn constant_trace() {
        for b in [ConvexBoundary::unit_disk(), ConvexBoundary::new(vec![1.0, 0.1]).unwrap()] {
            let u = solve_laplace_dirichlet(&b, &PeriodicTable::from_fn(64, |_| 2.5).unwrap()).unwrap();
            for x in [Vec2::zeros(), Vec2::new(0.4, -0.3)] {
                assert_relative_eq!(u.value(x), 2.5, epsilon = 1e-8);
                assert!(u.gradient(x).norm() < 1e-7);
            }
        }
    }

    #[test]
    fn mfs_reproduces_a_harmonic_polynomial() {
        let b = ConvexBoundary::new(vec![1.0, 0.1]).unwrap();
        let exact = |x: Vec2| x.x * x.x - x.y * x.y + 0.5 * x.x * x.y + x.y;
        let d = PeriodicTable::from_fn(256, |tau| exact(b.point(b.theta_of_tau(tau)))).unwrap();
        let u = solve_laplace_dirichlet(&b, &d).unwrap();
        assert!(u.boundary_misfit < 1e-8, "{}", u.boundary_misfit);
        for x in [Vec2::zeros(), Vec2::new(0.5, 0.2), Vec2::new(-0.3, 0.6)] {
            assert!((u.value(x) - exact(x)).abs() < 1e-8, "{}", u.value(x) - exact(x));
        }
        let g = u.gradient(Vec2::new(0.5, 0.2));
        assert!((g - Vec2::new(1.0 + 0.1, -0.4 + 0.25 + 1.0)).norm() < 1e-7);
        assert!(u.discrete_laplacian(Vec2::new(0.2, 0.1), 1e-3).abs() < 1e-5);
    }
}
