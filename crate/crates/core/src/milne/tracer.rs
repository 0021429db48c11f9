//! Characteristics of `sin(phi) d/d eta + F(eta) cos(phi) d/d phi`.
//!
//! Along a characteristic `(R - eps eta) cos(phi)` is conserved, so every
//! quantity has a closed form in terms of
//! `a = (R - eps eta)|cos phi|` and `S(xi) = sqrt((R - eps xi)^2 - a^2)`;
//! in particular `sin phi'(xi) = S(xi) / (R - eps xi)` and the optical depth
//! between two heights on one branch is `(S(lo) - S(hi)) / eps`. The flat
//! problem is the limit `eps -> 0` of the same formulas.

use crate::error::{Error, Result};

/// Optical depth beyond which the backward trace is truncated.
pub const MAX_DEPTH: f64 = 40.0;

/// Longest sub-panel in optical depth.
const MAX_PANEL_DEPTH: f64 = 1.0;

const GL4_X: [f64; 4] = [
    -0.861_136_311_594_052_6,
    -0.339_981_043_584_856_3,
    0.339_981_043_584_856_3,
    0.861_136_311_594_052_6,
];
const GL4_W: [f64; 4] = [
    0.347_854_845_137_453_9,
    0.652_145_154_862_546_1,
    0.652_145_154_862_546_1,
    0.347_854_845_137_453_9,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    /// `sin phi > 0`: traced back to `eta = 0` directly.
    I,
    /// `sin phi < 0`, reaches `L`, reflects, then back to `0`.
    II,
    /// `sin phi < 0`, turns at `eta_plus < L`, then back to `0`.
    III,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceResult {
    /// `arccos(e^{V(eta') - V(eta)} cos phi)`, in `[0, pi]`.
    pub phi_prime: f64,
    pub region: Region,
    /// Turning height (infinite in the flat problem).
    pub eta_plus: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharacteristicTracer {
    /// Curvature coupling; zero for the flat problem.
    eps: f64,
    r_kappa: f64,
    length: f64,
}

/// One Gauss point on a backward characteristic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathSample {
    pub eta: f64,
    pub phi: f64,
    /// Normalised weight: sum over the panel is one.
    pub weight: f64,
}

/// A piece of backward characteristic inside one `eta` cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathPanel {
    /// Exact mass `e^{-z_a} - e^{-z_b}` of the kernel `e^{-z} dz`.
    pub mass: f64,
    pub samples: [PathSample; 4],
}

/// Endpoint data of a backward characteristic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathEnd {
    /// Total optical depth to the in-flow boundary.
    pub depth: f64,
    /// Velocity angle at `eta = 0`, `sin > 0`.
    pub inflow_phi: f64,
    pub region: Region,
}

#[derive(Debug, Clone, Copy)]
enum Branch {
    /// Backward trace moving to smaller `eta` (forward motion upward).
    Down,
    /// Backward trace moving to larger `eta` (forward motion downward).
    Up,
}

impl CharacteristicTracer {
    pub fn new(epsilon: f64, r_kappa: f64, length: f64) -> Result<Self> {
        if !(epsilon > 0.0) || !(r_kappa > 0.0) || !(length > 0.0) {
            return Err(Error::InvalidInput(format!(
                "tracer parameters must be positive (epsilon = {epsilon}, R = {r_kappa}, L = {length})"
            )));
        }
        if epsilon * length >= r_kappa {
            return Err(Error::InvalidInput(format!(
                "epsilon L = {} must be below R_kappa = {r_kappa}",
                epsilon * length
            )));
        }
        Ok(Self {
            eps: epsilon,
            r_kappa,
            length,
        })
    }

    /// Tracer for the flat problem (`F = 0`).
    pub fn flat(length: f64) -> Self {
        Self {
            eps: 0.0,
            r_kappa: 1.0,
            length,
        }
    }

    pub fn is_flat(&self) -> bool {
        self.eps == 0.0
    }

    pub fn epsilon(&self) -> f64 {
        self.eps
    }

    pub fn r_kappa(&self) -> f64 {
        self.r_kappa
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// `V(eta) = ln(R / (R - eps eta))`.
    pub fn potential(&self, eta: f64) -> f64 {
        if self.is_flat() {
            return 0.0;
        }
        -(-self.eps * eta / self.r_kappa).ln_1p()
    }

    /// `F(eta) = -eps / (R - eps eta)`.
    pub fn force(&self, eta: f64) -> f64 {
        -self.eps / (self.r_kappa - self.eps * eta)
    }

    pub fn energy(&self, eta: f64, phi: f64) -> f64 {
        (-self.potential(eta)).exp() * phi.cos()
    }

    /// Kinetic weight `sqrt(1 - ((R - eps eta) cos phi / R)^2)`.
    pub fn zeta(&self, eta: f64, phi: f64) -> f64 {
        let c = (self.r_kappa - self.eps * eta) * phi.cos() / self.r_kappa;
        (1.0 - c * c).max(0.0).sqrt()
    }

    fn a(&self, eta: f64, phi: f64) -> f64 {
        (self.r_kappa - self.eps * eta) * phi.cos().abs()
    }

    fn s_of(&self, a: f64, xi: f64) -> f64 {
        let q = self.r_kappa - self.eps * xi;
        ((q - a) * (q + a)).max(0.0).sqrt()
    }

    pub fn eta_plus(&self, eta: f64, phi: f64) -> f64 {
        if self.is_flat() {
            return f64::INFINITY;
        }
        let a = self.a(eta, phi);
        ((self.r_kappa - a) / self.eps).max(eta)
    }

    pub fn region(&self, eta: f64, phi: f64) -> Region {
        if phi.sin() > 0.0 {
            Region::I
        } else if self.eta_plus(eta, phi) >= self.length {
            Region::II
        } else {
            Region::III
        }
    }

    pub fn trace(&self, eta: f64, phi: f64, eta_prime: f64) -> Result<TraceResult> {
        let ratio = (self.r_kappa - self.eps * eta) / (self.r_kappa - self.eps * eta_prime);
        let c = ratio * phi.cos();
        let eta_plus = self.eta_plus(eta, phi);
        if c.abs() > 1.0 + 1e-14 {
            return Err(Error::EnergyOutOfRange {
                eta_prime,
                eta_plus,
            });
        }
        let phi_prime = if eta_prime == eta { phi.abs() } else { c.clamp(-1.0, 1.0).acos() };
        Ok(TraceResult {
            phi_prime,
            region: self.region(eta, phi),
            eta_plus,
        })
    }

    /// Optical depth `G = int_lo^hi 1/sin phi'(xi) d xi` on the
    /// characteristic through `(eta_hi, phi)`; requires `eta_hi <= eta_plus`.
    pub fn g_integral(&self, eta_hi: f64, eta_lo: f64, phi: f64) -> f64 {
        let a = self.a(eta_hi, phi);
        self.depth_between(a, eta_lo, eta_hi)
    }

    fn depth_between(&self, a: f64, lo: f64, hi: f64) -> f64 {
        if hi <= lo {
            return 0.0;
        }
        let den = self.s_of(a, lo) + self.s_of(a, hi);
        (hi - lo) * (2.0 * self.r_kappa - self.eps * (lo + hi)) / den
    }

    /// Same integral evaluated by adaptive quadrature, with the substitution
    /// `xi = eta_plus - u^2` removing the turning-point singularity.
    pub fn g_integral_quadrature(&self, eta_hi: f64, eta_lo: f64, phi: f64, tol: f64) -> f64 {
        if eta_hi <= eta_lo {
            return 0.0;
        }
        let a = self.a(eta_hi, phi);
        let ep = self.eta_plus(eta_hi, phi);
        let (r, e) = (self.r_kappa, self.eps);
        if !ep.is_finite() || ep - eta_hi > 0.25 * (eta_hi - eta_lo).max(1e-3) {
            let f = |xi: f64| (r - e * xi) / self.s_of(a, xi);
            return adaptive_simpson(&f, eta_lo, eta_hi, tol);
        }
        let g = |u: f64| {
            let xi = ep - u * u;
            2.0 * (r - e * xi) / (e * (2.0 * r - e * (xi + ep))).sqrt()
        };
        let u_lo = (ep - eta_hi).max(0.0).sqrt();
        let u_hi = (ep - eta_lo).sqrt();
        adaptive_simpson(&g, u_lo, u_hi, tol)
    }

    /// Walks the backward characteristic from grid node `(eta, phi)`,
    /// splitting it at every crossing of `eta_nodes`, and calls `visit` for
    /// each panel. Returns the total depth and the in-flow angle.
    pub fn walk<V>(&self, eta: f64, phi: f64, eta_nodes: &[f64], mut visit: V) -> PathEnd
    where
        V: FnMut(usize, &PathPanel),
    {
        let sgn = if phi.cos() >= 0.0 { 1.0 } else { -1.0 };
        let a = self.a(eta, phi);
        let region = self.region(eta, phi);
        let s_eta = self.s_of(a, eta);
        let mut offset = 0.0;
        match region {
            Region::I => {
                let d = self.depth_between(a, 0.0, eta);
                self.walk_branch(Branch::Down, a, sgn, eta, s_eta, 0.0, d, offset, eta_nodes, &mut visit);
                offset += d;
            }
            Region::II => {
                let l = self.length;
                let d_up = self.depth_between(a, eta, l);
                self.walk_branch(Branch::Up, a, sgn, eta, s_eta, l, d_up, offset, eta_nodes, &mut visit);
                offset += d_up;
                let d_down = self.depth_between(a, 0.0, l);
                self.walk_branch(Branch::Down, a, sgn, l, self.s_of(a, l), 0.0, d_down, offset, eta_nodes, &mut visit);
                offset += d_down;
            }
            Region::III => {
                let ep = self.eta_plus(eta, phi);
                let d_up = self.depth_between(a, eta, ep);
                self.walk_branch(Branch::Up, a, sgn, eta, s_eta, ep, d_up, offset, eta_nodes, &mut visit);
                offset += d_up;
                let d_down = self.depth_between(a, 0.0, ep);
                self.walk_branch(Branch::Down, a, sgn, ep, 0.0, 0.0, d_down, offset, eta_nodes, &mut visit);
                offset += d_down;
            }
        }
        let s0 = self.s_of(a, 0.0);
        PathEnd {
            depth: offset,
            inflow_phi: s0.atan2(sgn * a),
            region,
        }
    }

    /// Position on a branch after optical depth `z` from `(xi0, s0)`.
    fn position(&self, branch: Branch, a: f64, xi0: f64, s0: f64, z: f64) -> (f64, f64) {
        let e = self.eps;
        let q0 = self.r_kappa - e * xi0;
        match branch {
            Branch::Down => {
                let s = s0 + e * z;
                let q = (a * a + s * s).sqrt();
                (xi0 - z * (2.0 * s0 + e * z) / (q0 + q), s)
            }
            Branch::Up => {
                let s = (s0 - e * z).max(0.0);
                let q = (a * a + s * s).sqrt();
                (xi0 + z * (2.0 * s0 - e * z) / (q0 + q), s)
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn walk_branch<V>(
        &self,
        branch: Branch,
        a: f64,
        sgn: f64,
        xi0: f64,
        s0: f64,
        xi_end: f64,
        depth: f64,
        offset: f64,
        eta_nodes: &[f64],
        visit: &mut V,
    ) where
        V: FnMut(usize, &PathPanel),
    {
        if depth <= 0.0 || offset >= MAX_DEPTH {
            return;
        }
        // Depths at which the branch crosses grid lines.
        let mut cuts = vec![0.0];
        match branch {
            Branch::Down => {
                for &y in eta_nodes.iter().rev() {
                    if y < xi0 && y > xi_end {
                        cuts.push(self.depth_between(a, y, xi0));
                    }
                }
            }
            Branch::Up => {
                for &y in eta_nodes {
                    if y > xi0 && y < xi_end {
                        cuts.push(self.depth_between(a, xi0, y));
                    }
                }
            }
        }
        cuts.push(depth);
        let n = eta_nodes.len();
        for w in cuts.windows(2) {
            let (za, zb) = (w[0], w[1]);
            if zb <= za {
                continue;
            }
            let mid = self.position(branch, a, xi0, s0, 0.5 * (za + zb)).0;
            let cell = locate_cell(eta_nodes, mid).min(n - 2);
            let pieces = ((zb - za) / MAX_PANEL_DEPTH).ceil().max(1.0) as usize;
            let dz = (zb - za) / pieces as f64;
            for p in 0..pieces {
                let z0 = za + p as f64 * dz;
                let z1 = z0 + dz;
                if offset + z0 >= MAX_DEPTH {
                    return;
                }
                let mass = (-(offset + z0)).exp() * (-(-dz).exp_m1());
                let mut samples = [PathSample {
                    eta: 0.0,
                    phi: 0.0,
                    weight: 0.0,
                }; 4];
                let mut wsum = 0.0;
                for g in 0..4 {
                    let z = z0 + 0.5 * dz * (1.0 + GL4_X[g]);
                    let (xi, s) = self.position(branch, a, xi0, s0, z);
                    let phi = match branch {
                        Branch::Down => s.atan2(sgn * a),
                        Branch::Up => (-s).atan2(sgn * a),
                    };
                    let w = GL4_W[g] * (-(z - z0)).exp();
                    wsum += w;
                    samples[g] = PathSample {
                        eta: xi.clamp(eta_nodes[cell], eta_nodes[cell + 1]),
                        phi,
                        weight: w,
                    };
                }
                for s in &mut samples {
                    s.weight /= wsum;
                }
                visit(cell, &PathPanel { mass, samples });
                let _ = z1;
            }
        }
    }
}

fn locate_cell(nodes: &[f64], x: f64) -> usize {
    match nodes.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
        Ok(i) => i,
        Err(0) => 0,
        Err(i) => i - 1,
    }
}

/// Adaptive Simpson quadrature with absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn rec<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: usize,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let diff = left + right - whole;
        if depth == 0 || diff.abs() <= 15.0 * tol {
            return left + right + diff / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 48)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn tracer() -> CharacteristicTracer {
        CharacteristicTracer::new(0.1, 1.0, 0.1f64.powf(-0.5)).unwrap()
    }

    #[test]
    fn potential_values() {
        let t = tracer();
        assert_eq!(t.potential(0.0), 0.0);
        assert_relative_eq!(t.potential(1.0), (1.0f64 / 0.9).ln(), epsilon = 1e-15);
        assert_relative_eq!(t.potential(1.0), 0.10536, epsilon = 1e-5);
        let h = 1e-5;
        for eta in [0.3, 1.0, 2.5] {
            let d = (t.potential(eta + h) - t.potential(eta - h)) / (2.0 * h);
            assert_relative_eq!(d, -t.force(eta), epsilon = 1e-8);
        }
        let f = CharacteristicTracer::flat(3.0);
        assert_eq!(f.potential(2.0), 0.0);
        assert!(t.force(2.0) < 0.0);
    }

    #[test]
    fn trace_identities() {
        let t = tracer();
        let r = t.trace(0.7, 1.1, 0.7).unwrap();
        assert_relative_eq!(r.phi_prime, 1.1);
        let r = t.trace(0.7, -1.1, 0.7).unwrap();
        assert_relative_eq!(r.phi_prime, 1.1);
        for ep in [0.0, 0.5, 2.0, 3.0] {
            let r = t.trace(1.0, PI / 2.0, ep).unwrap();
            assert_relative_eq!(r.phi_prime, PI / 2.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn turning_point_example() {
        let t = tracer();
        let (eta, phi) = (0.5, -0.2);
        let ep = t.eta_plus(eta, phi);
        // e^{-V(ep)} = e^{-V(0.5)} cos 0.2, by bisection on the energy.
        let target = (-t.potential(eta)).exp() * phi.cos();
        let (mut lo, mut hi) = (eta, t.length());
        for _ in 0..200 {
            let m = 0.5 * (lo + hi);
            if (-t.potential(m)).exp() > target {
                lo = m;
            } else {
                hi = m;
            }
        }
        assert_relative_eq!(ep, 0.5 * (lo + hi), epsilon = 1e-12);
        assert_eq!(t.region(eta, phi), Region::III);
        for k in 0..10 {
            let y = ep * k as f64 / 10.0;
            let r = t.trace(eta, phi, y).unwrap();
            assert!((t.energy(y, r.phi_prime) - t.energy(eta, phi)).abs() < 1e-12);
            assert!((t.zeta(y, r.phi_prime) - t.zeta(eta, phi)).abs() < 1e-12);
        }
        assert!(matches!(
            t.trace(eta, phi, ep + 0.1),
            Err(Error::EnergyOutOfRange { .. })
        ));
    }

    fn midpoint_g(t: &CharacteristicTracer, hi: f64, lo: f64, phi: f64, n: usize) -> f64 {
        let h = (hi - lo) / n as f64;
        (0..n)
            .map(|k| {
                let xi = lo + (k as f64 + 0.5) * h;
                h / t.trace(hi, phi, xi).unwrap().phi_prime.sin()
            })
            .sum()
    }

    #[test]
    fn g_integral_against_midpoint() {
        let t = tracer();
        let g = t.g_integral(0.5, 0.0, 0.1);
        let m = midpoint_g(&t, 0.5, 0.0, 0.1, 1_000_000);
        assert!((g - m).abs() < 1e-8, "{g} {m}");
        let q = t.g_integral_quadrature(0.5, 0.0, 0.1, 1e-13);
        assert!((g - q).abs() < 1e-10);
        assert!(g >= 0.5);
    }

    #[test]
    fn g_integral_turning_point() {
        let t = tracer();
        let phi = 0.3;
        let ep = t.eta_plus(0.4, phi);
        let g = t.g_integral(ep, 0.4, t.trace(0.4, phi, ep).unwrap().phi_prime);
        let q = t.g_integral_quadrature(ep, 0.4, t.trace(0.4, phi, ep).unwrap().phi_prime, 1e-13);
        assert!(g.is_finite());
        assert!((g - q).abs() < 1e-9, "{g} {q}");
    }

    #[test]
    fn flat_g_integral() {
        let t = CharacteristicTracer::flat(3.0);
        for phi in [0.2, 1.0, PI / 2.0, 2.5] {
            assert_relative_eq!(t.g_integral(1.5, 0.25, phi), 1.25 / phi.sin(), epsilon = 1e-13);
        }
        let t = tracer();
        assert_relative_eq!(t.g_integral(2.0, 0.5, PI / 2.0), 1.5, epsilon = 1e-14);
    }

    #[test]
    fn walk_mass_and_energy() {
        let t = tracer();
        let nodes: Vec<f64> = (0..=16).map(|k| k as f64 * t.length() / 16.0).collect();
        for &(eta, phi) in &[(1.3, 0.4), (1.3, -0.05), (1.3, -1.2), (0.2, -2.9), (3.0, -0.3)] {
            let mut mass = 0.0;
            let mut ok = true;
            let e0 = t.energy(eta, phi);
            let end = t.walk(eta, phi, &nodes, |_, p| {
                mass += p.mass;
                for s in &p.samples {
                    ok &= (t.energy(s.eta, s.phi) - e0).abs() < 1e-9;
                }
            });
            assert!(ok);
            assert_relative_eq!(mass + (-end.depth).exp(), 1.0, epsilon = 1e-12);
            assert!(end.inflow_phi.sin() >= 0.0);
            assert!((t.energy(0.0, end.inflow_phi) - e0).abs() < 1e-12);
        }
    }
}
