//! Smooth convex domains described by a polar boundary curve, and the change
//! of variables between Cartesian phase space `(x, w)` and boundary-layer
//! coordinates `(eta, tau, phi)`.
//!
//! The boundary is `x0(theta) = r(theta) (cos theta, sin theta)` with
//! `r(theta) = c0 + c2 cos 2theta + c4 cos 4theta + ...`. Points near the
//! boundary are written `x = x0(theta) - mu n(theta)`, the normal angle is
//! `tau`, and velocities are `w = (-sin xi, -cos xi)` with `phi = tau + xi`,
//! so that `w . n = -sin phi` and the in-flow set is `sin phi > 0`.

use std::f64::consts::PI;

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec2 = Vector2<f64>;

/// Number of samples used for the convexity gate and for `R_min`.
pub const DEFAULT_THETA_SAMPLES: usize = 4096;

const COARSE_PROJECTION_SAMPLES: usize = 96;

/// Wraps an angle into `[-pi, pi)`.
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut w = (a + PI).rem_euclid(two_pi) - PI;
    if w >= PI {
        w -= two_pi;
    }
    w
}

/// A smooth, strictly convex domain given by a finite Fourier cosine series
/// for its polar radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexBoundary {
    cosine_coefficients: Vec<f64>,
    n_theta_samples: usize,
    r_min_curvature: f64,
    r_max: f64,
    perimeter: f64,
}

/// Normal frame at a boundary point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalFrame {
    pub theta: f64,
    /// Normal angle, `n = (cos tau, sin tau)`, wrapped into `[-pi, pi)`.
    pub tau: f64,
    pub normal: Vec2,
    pub curvature: f64,
    pub radius_of_curvature: f64,
    /// `d tau / d theta = kappa (r^2 + r'^2)^{1/2}`.
    pub dtau_dtheta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryLayerCoords {
    pub eta: f64,
    pub tau: f64,
    pub phi: f64,
    pub epsilon: f64,
}

impl BoundaryLayerCoords {
    /// Normal distance `mu = epsilon * eta`.
    pub fn mu(&self) -> f64 {
        self.epsilon * self.eta
    }
}

impl ConvexBoundary {
    pub fn new(cosine_coefficients: Vec<f64>) -> Result<Self> {
        Self::with_samples(cosine_coefficients, DEFAULT_THETA_SAMPLES)
    }

    pub fn unit_disk() -> Self {
        Self::new(vec![1.0]).expect("unit disk is convex")
    }

    pub fn with_samples(cosine_coefficients: Vec<f64>, n_theta_samples: usize) -> Result<Self> {
        if cosine_coefficients.is_empty() {
            return Err(Error::InvalidBoundary("no cosine coefficients".into()));
        }
        if cosine_coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidBoundary("non-finite coefficient".into()));
        }
        if n_theta_samples < 16 {
            return Err(Error::InvalidBoundary(format!(
                "n_theta_samples = {n_theta_samples} is too small"
            )));
        }
        let mut b = Self {
            cosine_coefficients,
            n_theta_samples,
            r_min_curvature: f64::INFINITY,
            r_max: 0.0,
            perimeter: 0.0,
        };
        let dtheta = 2.0 * PI / n_theta_samples as f64;
        let mut kappa_min = f64::INFINITY;
        let mut r_min = f64::INFINITY;
        let mut r_max: f64 = 0.0;
        let mut perimeter = 0.0;
        for i in 0..n_theta_samples {
            let theta = -PI + i as f64 * dtheta;
            let (r, dr, _) = b.radius_derivatives(theta);
            r_min = r_min.min(r);
            r_max = r_max.max(r);
            kappa_min = kappa_min.min(b.curvature(theta));
            perimeter += (r * r + dr * dr).sqrt() * dtheta;
        }
        if r_min <= 0.0 {
            return Err(Error::InvalidBoundary(format!(
                "polar radius is not positive (min r = {r_min:.3e})"
            )));
        }
        if kappa_min <= 0.0 {
            return Err(Error::InvalidBoundary(format!(
                "boundary is not strictly convex (min curvature = {kappa_min:.3e})"
            )));
        }
        b.r_min_curvature = 1.0 / b.max_curvature_sampled();
        b.r_max = r_max;
        b.perimeter = perimeter;
        Ok(b)
    }

    fn max_curvature_sampled(&self) -> f64 {
        let dtheta = 2.0 * PI / self.n_theta_samples as f64;
        (0..self.n_theta_samples)
            .map(|i| self.curvature(-PI + i as f64 * dtheta))
            .fold(0.0, f64::max)
    }

    pub fn cosine_coefficients(&self) -> &[f64] {
        &self.cosine_coefficients
    }

    pub fn n_theta_samples(&self) -> usize {
        self.n_theta_samples
    }

    /// True when the boundary is a circle centred at the pole.
    pub fn is_disk(&self) -> bool {
        self.cosine_coefficients[1..].iter().all(|&c| c == 0.0)
    }

    /// Validity radius of the tubular chart, `min_theta R_kappa(theta)`.
    pub fn r_min(&self) -> f64 {
        self.r_min_curvature
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn perimeter(&self) -> f64 {
        self.perimeter
    }

    /// `(r, r', r'')` at `theta`.
    pub fn radius_derivatives(&self, theta: f64) -> (f64, f64, f64) {
        let mut r = 0.0;
        let mut dr = 0.0;
        let mut ddr = 0.0;
        for (k, &c) in self.cosine_coefficients.iter().enumerate() {
            if k == 0 {
                r += c;
                continue;
            }
            if c == 0.0 {
                continue;
            }
            let m = 2.0 * k as f64;
            let (s, co) = (m * theta).sin_cos();
            r += c * co;
            dr -= c * m * s;
            ddr -= c * m * m * co;
        }
        (r, dr, ddr)
    }

    pub fn radius(&self, theta: f64) -> f64 {
        self.radius_derivatives(theta).0
    }

    pub fn curvature(&self, theta: f64) -> f64 {
        let (r, dr, ddr) = self.radius_derivatives(theta);
        let p2 = r * r + dr * dr;
        (r * r + 2.0 * dr * dr - r * ddr) / (p2 * p2.sqrt())
    }

    pub fn radius_of_curvature(&self, theta: f64) -> f64 {
        1.0 / self.curvature(theta)
    }

    pub fn point(&self, theta: f64) -> Vec2 {
        let r = self.radius(theta);
        Vec2::new(r * theta.cos(), r * theta.sin())
    }

    /// `d x0 / d theta`.
    pub fn tangent(&self, theta: f64) -> Vec2 {
        let (r, dr, _) = self.radius_derivatives(theta);
        let (s, c) = theta.sin_cos();
        Vec2::new(dr * c - r * s, dr * s + r * c)
    }

    fn second_derivative(&self, theta: f64) -> Vec2 {
        let (r, dr, ddr) = self.radius_derivatives(theta);
        let (s, c) = theta.sin_cos();
        Vec2::new(
            ddr * c - 2.0 * dr * s - r * c,
            ddr * s + 2.0 * dr * c - r * s,
        )
    }

    pub fn normal(&self, theta: f64) -> Vec2 {
        let (r, dr, _) = self.radius_derivatives(theta);
        let p = (r * r + dr * dr).sqrt();
        let (s, c) = theta.sin_cos();
        Vec2::new((r * c + dr * s) / p, (r * s - dr * c) / p)
    }

    /// Unwrapped normal angle; `tau - theta` stays in `(-pi/2, pi/2)`.
    pub fn tau_unwrapped(&self, theta: f64) -> f64 {
        let (r, dr, _) = self.radius_derivatives(theta);
        theta + (-dr).atan2(r)
    }

    pub fn tau(&self, theta: f64) -> f64 {
        wrap_angle(self.tau_unwrapped(theta))
    }

    pub fn dtau_dtheta(&self, theta: f64) -> f64 {
        let (r, dr, _) = self.radius_derivatives(theta);
        self.curvature(theta) * (r * r + dr * dr).sqrt()
    }

    pub fn local_frame(&self, theta: f64) -> LocalFrame {
        let curvature = self.curvature(theta);
        LocalFrame {
            theta,
            tau: self.tau(theta),
            normal: self.normal(theta),
            curvature,
            radius_of_curvature: 1.0 / curvature,
            dtau_dtheta: self.dtau_dtheta(theta),
        }
    }

    /// Inverts `tau(theta)`; the result is wrapped into `[-pi, pi)`.
    pub fn theta_of_tau(&self, tau: f64) -> f64 {
        if self.is_disk() {
            return wrap_angle(tau);
        }
        let target = wrap_angle(tau);
        // tau - theta is bounded by pi/2 in magnitude, so the root is bracketed.
        let mut lo = target - 0.5 * PI;
        let mut hi = target + 0.5 * PI;
        let mut theta = target;
        for _ in 0..100 {
            let g = self.tau_unwrapped(theta) - target;
            if g.abs() < 1e-15 {
                break;
            }
            if g > 0.0 {
                hi = theta;
            } else {
                lo = theta;
            }
            let step = g / self.dtau_dtheta(theta);
            let next = theta - step;
            theta = if next > lo && next < hi {
                next
            } else {
                0.5 * (lo + hi)
            };
            if step.abs() < 1e-16 || hi - lo < 1e-16 {
                break;
            }
        }
        wrap_angle(theta)
    }

    /// Radius of curvature at the boundary point with normal angle `tau`.
    pub fn radius_of_curvature_at_tau(&self, tau: f64) -> f64 {
        self.radius_of_curvature(self.theta_of_tau(tau))
    }

    /// `|x| / r(atan2 x)`: 1 on the boundary, < 1 inside.
    pub fn scaled_radius(&self, x: Vec2) -> f64 {
        let rho = x.norm();
        if rho == 0.0 {
            return 0.0;
        }
        rho / self.radius(x.y.atan2(x.x))
    }

    pub fn contains(&self, x: Vec2) -> bool {
        self.scaled_radius(x) <= 1.0 + 1e-12
    }

    /// Foot of the normal through `x`: returns `(theta, mu)` with
    /// `x = x0(theta) - mu n(theta)`.
    pub fn project(&self, x: Vec2) -> Result<(f64, f64)> {
        let mut best = (0.0, f64::INFINITY);
        for i in 0..COARSE_PROJECTION_SAMPLES {
            let th = -PI + 2.0 * PI * i as f64 / COARSE_PROJECTION_SAMPLES as f64;
            let d = (x - self.point(th)).norm_squared();
            if d < best.1 {
                best = (th, d);
            }
        }
        let mut theta = best.0;
        let mut converged = false;
        let mut h_abs = f64::INFINITY;
        for _ in 0..60 {
            let d = x - self.point(theta);
            let t = self.tangent(theta);
            let h = d.dot(&t);
            let dh = -t.norm_squared() + d.dot(&self.second_derivative(theta));
            h_abs = h.abs();
            if dh >= 0.0 {
                // Outside the region where the projection is a minimum; nudge
                // toward the coarse minimiser.
                theta -= 0.1 * h.signum() * 2.0 * PI / COARSE_PROJECTION_SAMPLES as f64;
                continue;
            }
            let mut step = -h / dh;
            let max_step = 2.0 * PI / COARSE_PROJECTION_SAMPLES as f64;
            if step.abs() > max_step {
                step = max_step * step.signum();
            }
            theta += step;
            if step.abs() < 1e-15 {
                converged = true;
                break;
            }
        }
        if !converged {
            let d = x - self.point(theta);
            let h = d.dot(&self.tangent(theta)) / self.tangent(theta).norm();
            if h.abs() > 1e-11 {
                return Err(Error::NoConvergence {
                    what: "normal projection",
                    iterations: 60,
                    residual: h_abs,
                });
            }
        }
        let theta = wrap_angle(theta);
        let mu = (self.point(theta) - x).dot(&self.normal(theta));
        Ok((theta, mu))
    }

    /// Cartesian `(x, w)` to boundary-layer coordinates.
    pub fn to_boundary_layer(&self, x: Vec2, w: Vec2, epsilon: f64) -> Result<BoundaryLayerCoords> {
        let (theta, mut mu) = self.project(x)?;
        if mu < 0.0 {
            if mu < -1e-10 {
                return Err(Error::OutsideDomain { mu });
            }
            mu = 0.0;
        }
        if mu >= self.r_min() {
            return Err(Error::PointOutsideTube {
                mu,
                r_min: self.r_min(),
            });
        }
        let tau = self.tau(theta);
        let xi = (-w.x).atan2(-w.y);
        Ok(BoundaryLayerCoords {
            eta: mu / epsilon,
            tau,
            phi: wrap_angle(tau + xi),
            epsilon,
        })
    }

    /// Inverse of [`ConvexBoundary::to_boundary_layer`].
    pub fn from_boundary_layer(&self, c: &BoundaryLayerCoords) -> (Vec2, Vec2) {
        let theta = self.theta_of_tau(c.tau);
        let x = self.point(theta) - c.mu() * self.normal(theta);
        let xi = c.phi - c.tau;
        (x, velocity_from_xi(xi))
    }
}

/// `w = (-sin xi, -cos xi)`.
pub fn velocity_from_xi(xi: f64) -> Vec2 {
    let (s, c) = xi.sin_cos();
    Vec2::new(-s, -c)
}

/// Velocity for the rotated angle `phi` at a boundary point with normal angle `tau`.
pub fn velocity_from_phi(tau: f64, phi: f64) -> Vec2 {
    velocity_from_xi(phi - tau)
}

/// Rotated velocity angle `phi` of `w` relative to the normal angle `tau`.
pub fn phi_from_velocity(tau: f64, w: Vec2) -> f64 {
    wrap_angle(tau + (-w.x).atan2(-w.y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn ellipse_like() -> ConvexBoundary {
        ConvexBoundary::new(vec![1.0, 0.1]).unwrap()
    }

    // Central differences of the parametrised curve give an independent
    // curvature: |x' cross x''| / |x'|^3.
    fn curvature_fd(b: &ConvexBoundary, theta: f64) -> f64 {
        let h = 1e-4;
        let p = |t: f64| b.point(t);
        let d1 = (p(theta + h) - p(theta - h)) / (2.0 * h);
        let d2 = (p(theta + h) - 2.0 * p(theta) + p(theta - h)) / (h * h);
        (d1.x * d2.y - d1.y * d2.x) / d1.norm().powi(3)
    }

    #[test]
    fn disk_curvature_is_one() {
        let b = ConvexBoundary::unit_disk();
        for th in [-3.0, -1.0, 0.0, 0.5, 2.5] {
            assert_relative_eq!(b.curvature(th), 1.0, epsilon = 1e-15);
        }
        assert_relative_eq!(b.r_min(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn perturbed_curvature_values() {
        let b = ellipse_like();
        // 1.65 / 1.1^3 and 0.45 / 0.9^3
        assert_relative_eq!(b.curvature(0.0), 1.65 / 1.1f64.powi(3), epsilon = 1e-14);
        assert_relative_eq!(b.curvature(PI / 2.0), 0.45 / 0.9f64.powi(3), epsilon = 1e-14);
        assert_relative_eq!(b.curvature(0.0), 1.239669, epsilon = 1e-6);
        assert_relative_eq!(b.curvature(PI / 2.0), 0.617284, epsilon = 1e-6);
        for th in [0.0, 0.3, PI / 4.0, PI / 2.0, 2.0] {
            assert_relative_eq!(b.curvature(th), curvature_fd(&b, th), epsilon = 1e-6);
        }
    }

    #[test]
    fn disk_frames() {
        let b = ConvexBoundary::unit_disk();
        let f = b.local_frame(0.0);
        assert_relative_eq!(f.normal.x, 1.0);
        assert_relative_eq!(f.normal.y, 0.0);
        assert_relative_eq!(f.tau, 0.0);
        let f = b.local_frame(PI / 2.0);
        assert_relative_eq!(f.normal.x, 0.0, epsilon = 1e-16);
        assert_relative_eq!(f.normal.y, 1.0);
        assert_relative_eq!(f.tau, PI / 2.0);
    }

    #[test]
    fn perturbed_normal_is_orthogonal_to_tangent() {
        let b = ellipse_like();
        let th = PI / 4.0;
        let n = b.normal(th);
        // r = 1, r' = -0.2 at pi/4: n = (r c + r' s, r s - r' c) / sqrt(1.04)
        let s = (0.5f64).sqrt();
        let p = (1.04f64).sqrt();
        assert_relative_eq!(n.x, (s - 0.2 * s) / p, epsilon = 1e-14);
        assert_relative_eq!(n.y, (s + 0.2 * s) / p, epsilon = 1e-14);
        let h = 1e-6;
        let t = (b.point(th + h) - b.point(th - h)) / (2.0 * h);
        assert!(n.dot(&t).abs() < 1e-9);
        let f = b.local_frame(th);
        assert_relative_eq!(f.normal.norm(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(f.curvature * f.radius_of_curvature, 1.0, epsilon = 1e-12);
        assert_relative_eq!(f.normal.x, f.tau.cos(), epsilon = 1e-12);
        assert_relative_eq!(f.normal.y, f.tau.sin(), epsilon = 1e-12);
    }

    #[test]
    fn frames_on_dense_grid() {
        let b = ConvexBoundary::new(vec![1.0, 0.08, -0.01]).unwrap();
        for i in 0..2000 {
            let th = -PI + 2.0 * PI * i as f64 / 2000.0;
            let f = b.local_frame(th);
            assert!((f.normal.norm() - 1.0).abs() < 1e-12);
            assert!((f.curvature * f.radius_of_curvature - 1.0).abs() < 1e-12);
            assert!(f.dtau_dtheta > 0.0);
            let h = 1e-6;
            let fd = (b.tau_unwrapped(th + h) - b.tau_unwrapped(th - h)) / (2.0 * h);
            assert!((fd - f.dtau_dtheta).abs() < 1e-6);
        }
    }

    #[test]
    fn convexity_gate_rejects() {
        assert!(ConvexBoundary::new(vec![1.0, 0.4]).is_err());
        assert!(ConvexBoundary::new(vec![-1.0]).is_err());
        assert!(ConvexBoundary::new(vec![]).is_err());
        assert!(ConvexBoundary::new(vec![1.0, 0.2]).is_err());
        assert!(ConvexBoundary::new(vec![1.0, 0.15]).is_ok());
    }

    #[test]
    fn theta_tau_inverse() {
        let b = ellipse_like();
        for i in 0..100 {
            let th = -PI + 2.0 * PI * (i as f64 + 0.37) / 100.0;
            let tau = b.tau(th);
            assert!((wrap_angle(b.theta_of_tau(tau) - th)).abs() < 1e-12);
        }
    }

    #[test]
    fn disk_radial_example() {
        let b = ConvexBoundary::unit_disk();
        for eps in [0.05, 0.1, 0.3] {
            let c = b
                .to_boundary_layer(Vec2::new(1.0 - eps, 0.0), Vec2::new(-1.0, 0.0), eps)
                .unwrap();
            assert_relative_eq!(c.eta, 1.0, epsilon = 1e-12);
            assert_relative_eq!(c.tau, 0.0, epsilon = 1e-14);
            let n = b.normal(0.0);
            assert_relative_eq!(Vec2::new(-1.0, 0.0).dot(&n), -c.phi.sin(), epsilon = 1e-14);
            assert!(c.phi.sin() > 0.0);
        }
        let c = b
            .to_boundary_layer(b.point(0.7), Vec2::new(0.0, 1.0), 0.1)
            .unwrap();
        assert!(c.eta.abs() < 1e-12);
    }

    #[test]
    fn head_on_inflow() {
        let b = ConvexBoundary::unit_disk();
        let (x, w) = b.from_boundary_layer(&BoundaryLayerCoords {
            eta: 0.0,
            tau: 0.0,
            phi: PI / 2.0,
            epsilon: 0.1,
        });
        assert_relative_eq!(x.x, 1.0);
        assert_relative_eq!(x.y, 0.0);
        assert_relative_eq!(w.dot(&b.normal(0.0)), -1.0, epsilon = 1e-15);
    }

    #[test]
    fn perturbed_example_round_trip() {
        let b = ellipse_like();
        let x = Vec2::new(0.9 * 0.3f64.cos(), 0.9 * 0.3f64.sin());
        let w = Vec2::new(0.0, -1.0);
        let c = b.to_boundary_layer(x, w, 0.1).unwrap();
        let (x2, w2) = b.from_boundary_layer(&c);
        assert!((x - x2).norm() < 1e-10);
        assert!((w - w2).norm() < 1e-12);
        assert!(c.eta > 0.0 && c.eta * 0.1 < b.r_min());
    }

    #[test]
    fn outside_tube_rejected() {
        let b = ConvexBoundary::unit_disk();
        let r = b.to_boundary_layer(Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), 0.1);
        assert!(matches!(r, Err(Error::PointOutsideTube { .. }) | Err(Error::NoConvergence { .. })));
        let e = ellipse_like();
        let r = e.to_boundary_layer(Vec2::new(0.05, 0.0), Vec2::new(1.0, 0.0), 0.1);
        assert!(matches!(r, Err(Error::PointOutsideTube { .. })));
        let r = e.to_boundary_layer(Vec2::new(1.2, 0.0), Vec2::new(1.0, 0.0), 0.1);
        assert!(matches!(r, Err(Error::OutsideDomain { .. })));
    }

    #[test]
    fn inflow_identity_on_boundary() {
        let b = ellipse_like();
        for i in 0..50 {
            let th = -PI + 2.0 * PI * i as f64 / 50.0;
            let tau = b.tau(th);
            for k in 0..16 {
                let xi = -PI + 2.0 * PI * k as f64 / 16.0;
                let w = velocity_from_xi(xi);
                let phi = tau + xi;
                assert!((w.dot(&b.normal(th)) + phi.sin()).abs() < 1e-12);
            }
        }
    }
}
