//! Grids: graded `eta` grids for the half-space problem, velocity grids
//! clustered at the grazing set, discrete ordinates on the circle, and the
//! boundary-refined polar mesh used by the 2D solver.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{wrap_angle, ConvexBoundary, Vec2};

/// Clustering strength used when clustering is switched on.
pub const DEFAULT_PHI_CLUSTERING: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum EtaGrading {
    Uniform,
    #[default]
    Geometric,
}

/// Nodes `0 = eta_0 < ... < eta_{n-1} = L` with `L = epsilon^{-1/2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct EtaGrid {
    nodes: Vec<f64>,
    length: f64,
}

impl EtaGrid {
    /// `n_nodes` grid points on `[0, epsilon^{-1/2}]`.
    pub fn new(epsilon: f64, n_nodes: usize, grading: EtaGrading) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::InvalidGrid(format!("epsilon = {epsilon} must be positive")));
        }
        Self::with_length(epsilon.powf(-0.5), epsilon, n_nodes, grading)
    }

    pub fn with_length(length: f64, epsilon: f64, n_nodes: usize, grading: EtaGrading) -> Result<Self> {
        if n_nodes < 4 {
            return Err(Error::InvalidGrid(format!("n_eta = {n_nodes} < 4")));
        }
        if !(length > 0.0) || !length.is_finite() {
            return Err(Error::InvalidGrid(format!("length = {length}")));
        }
        let cells = n_nodes - 1;
        let uniform = length / cells as f64;
        let first = epsilon * uniform;
        let nodes = match grading {
            EtaGrading::Geometric if epsilon < 1.0 => {
                let q = geometric_ratio(first / length, cells);
                let mut nodes = Vec::with_capacity(n_nodes);
                let mut x = 0.0;
                let mut h = first;
                nodes.push(0.0);
                for _ in 0..cells - 1 {
                    x += h;
                    nodes.push(x);
                    h *= q;
                }
                nodes.push(length);
                nodes
            }
            _ => (0..n_nodes)
                .map(|i| {
                    if i == cells {
                        length
                    } else {
                        i as f64 * uniform
                    }
                })
                .collect(),
        };
        Ok(Self { nodes, length })
    }

    /// Grid with the given explicit nodes (must start at 0 and increase).
    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 || nodes[0] != 0.0 || nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid("eta nodes must start at 0 and increase".into()));
        }
        let length = *nodes.last().unwrap();
        Ok(Self { nodes, length })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// Every cell bisected.
    pub fn refined(&self) -> Self {
        let mut nodes = Vec::with_capacity(2 * self.nodes.len() - 1);
        for w in self.nodes.windows(2) {
            nodes.push(w[0]);
            nodes.push(0.5 * (w[0] + w[1]));
        }
        nodes.push(self.length);
        Self {
            nodes,
            length: self.length,
        }
    }

    /// Cell index `k` with `nodes[k] <= eta <= nodes[k+1]`, clamped.
    pub fn locate(&self, eta: f64) -> usize {
        let n = self.nodes.len();
        match self.nodes.binary_search_by(|v| v.partial_cmp(&eta).unwrap()) {
            Ok(i) => i.min(n - 2),
            Err(0) => 0,
            Err(i) => (i - 1).min(n - 2),
        }
    }

    /// Piecewise-linear interpolation of nodal values.
    pub fn interpolate(&self, values: &[f64], eta: f64) -> f64 {
        let k = self.locate(eta);
        let (a, b) = (self.nodes[k], self.nodes[k + 1]);
        let t = ((eta - a) / (b - a)).clamp(0.0, 1.0);
        (1.0 - t) * values[k] + t * values[k + 1]
    }
}

/// Ratio `q` with `first * (q^cells - 1)/(q - 1) = 1` where `first` is a
/// fraction of the total length.
fn geometric_ratio(first: f64, cells: usize) -> f64 {
    let n = cells as f64;
    if first * n >= 1.0 {
        return 1.0;
    }
    let sum = |q: f64| {
        if (q - 1.0).abs() < 1e-12 {
            n
        } else {
            (q.powf(n) - 1.0) / (q - 1.0)
        }
    };
    let target = 1.0 / first;
    let (mut lo, mut hi) = (1.0, 2.0);
    while sum(hi) < target {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if sum(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Velocity grid on `[-pi, pi)`, symmetric under `phi -> -phi` and under
/// `phi -> pi - phi`. With clustering on, nodes concentrate where
/// `sin phi = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhiGrid {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    clustering: f64,
}

impl PhiGrid {
    /// `n` nodes (even, >= 4); `clustering` in `[0, 1)`.
    pub fn new(n: usize, clustering: f64) -> Result<Self> {
        if n < 4 || !n.is_multiple_of(4) {
            return Err(Error::InvalidGrid(format!("n_phi = {n} must be a multiple of 4")));
        }
        if !(0.0..1.0).contains(&clustering) {
            return Err(Error::InvalidGrid(format!("clustering = {clustering} not in [0, 1)")));
        }
        let h = 2.0 * PI / n as f64;
        let mut nodes = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for j in 0..n {
            let t = -PI + (j as f64 + 0.5) * h;
            nodes.push(t - 0.5 * clustering * (2.0 * t).sin());
            weights.push(h * (1.0 - clustering * (2.0 * t).cos()));
        }
        // Enforce exact mirror symmetry of the stored values.
        for j in 0..n / 2 {
            let m = n - 1 - j;
            nodes[m] = -nodes[j];
            weights[m] = weights[j];
        }
        Ok(Self {
            nodes,
            weights,
            clustering,
        })
    }

    pub fn uniform(n: usize) -> Result<Self> {
        Self::new(n, 0.0)
    }

    pub fn clustered(n: usize) -> Result<Self> {
        Self::new(n, DEFAULT_PHI_CLUSTERING)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn clustering(&self) -> f64 {
        self.clustering
    }

    /// Index of `-phi_j`.
    pub fn reflect(&self, j: usize) -> usize {
        self.nodes.len() - 1 - j
    }

    /// Grid with twice as many nodes and the same clustering.
    pub fn refined(&self) -> Self {
        Self::new(2 * self.nodes.len(), self.clustering).expect("refinement of a valid grid")
    }

    pub fn average(&self, values: &[f64]) -> f64 {
        angular_average(&self.weights, values)
    }

    /// `(j0, j1, t)` with `phi` between `nodes[j0]` and `nodes[j1]` on the
    /// periodic circle, `t` the linear fraction toward `j1`.
    pub fn bracket(&self, phi: f64) -> (usize, usize, f64) {
        let n = self.nodes.len();
        let phi = wrap_angle(phi);
        let first = self.nodes[0];
        let last = self.nodes[n - 1];
        if phi < first || phi >= last {
            let span = first + 2.0 * PI - last;
            let d = if phi >= last { phi - last } else { phi + 2.0 * PI - last };
            return (n - 1, 0, (d / span).clamp(0.0, 1.0));
        }
        let k = match self.nodes.binary_search_by(|v| v.partial_cmp(&phi).unwrap()) {
            Ok(i) => i.min(n - 2),
            Err(i) => i - 1,
        };
        let t = (phi - self.nodes[k]) / (self.nodes[k + 1] - self.nodes[k]);
        (k, k + 1, t.clamp(0.0, 1.0))
    }

    /// Periodic linear interpolation of nodal values.
    pub fn interpolate(&self, values: &[f64], phi: f64) -> f64 {
        let (a, b, t) = self.bracket(phi);
        (1.0 - t) * values[a] + t * values[b]
    }
}

/// Uniform discrete ordinates `psi_j = (j + 1/2) 2 pi / n`, velocity
/// `w_j = (cos psi_j, sin psi_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ordinates {
    angles: Vec<f64>,
    weights: Vec<f64>,
}

impl Ordinates {
    pub fn new(n: usize) -> Result<Self> {
        if n < 4 || !n.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!("n_ordinates = {n} must be even and >= 4")));
        }
        let h = 2.0 * PI / n as f64;
        Ok(Self {
            angles: (0..n).map(|j| (j as f64 + 0.5) * h).collect(),
            weights: vec![h; n],
        })
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    pub fn velocity(&self, j: usize) -> Vec2 {
        let (s, c) = self.angles[j].sin_cos();
        Vec2::new(c, s)
    }

    pub fn average(&self, values: &[f64]) -> f64 {
        angular_average(&self.weights, values)
    }
}

/// `(1/2pi) sum_j w_j v_j`.
pub fn angular_average(weights: &[f64], values: &[f64]) -> f64 {
    debug_assert_eq!(weights.len(), values.len());
    weights.iter().zip(values).map(|(w, v)| w * v).sum::<f64>() / (2.0 * PI)
}

/// Resolution knobs for [`SpatialMesh`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshSpec {
    /// Radial spacing (in the scaled radius `s`) away from the boundary.
    pub interior_spacing: f64,
    pub n_theta: usize,
    /// Cells per `epsilon` inside the boundary band.
    pub cells_per_epsilon: usize,
    /// Width of the uniformly refined band, in units of `epsilon`.
    pub band_width: f64,
    pub growth: f64,
}

impl MeshSpec {
    /// `resolution` cells across the unit scaled radius, `4 * resolution`
    /// angular sectors.
    pub fn from_resolution(resolution: usize) -> Self {
        Self {
            interior_spacing: 1.0 / resolution as f64,
            n_theta: 4 * resolution,
            cells_per_epsilon: 8,
            band_width: 2.0,
            growth: 1.2,
        }
    }
}

/// Star-shaped polar mesh `x = s r(theta) (cos theta, sin theta)` on rings
/// `0 < s_0 < ... < s_K = 1` and uniform sectors. Node index is
/// `k * n_theta + l`.
#[derive(Debug, Clone)]
pub struct SpatialMesh {
    boundary: ConvexBoundary,
    rings: Vec<f64>,
    n_theta: usize,
    nodes: Vec<Vec2>,
    weights: Vec<f64>,
    boundary_flags: Vec<bool>,
    layer_depth: f64,
}

impl SpatialMesh {
    pub fn new(boundary: &ConvexBoundary, epsilon: f64, resolution: usize) -> Result<Self> {
        if resolution < 4 {
            return Err(Error::InvalidGrid(format!("mesh_resolution = {resolution} < 4")));
        }
        Self::from_spec(boundary, epsilon, &MeshSpec::from_resolution(resolution))
    }

    pub fn from_spec(boundary: &ConvexBoundary, epsilon: f64, spec: &MeshSpec) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::InvalidGrid(format!("epsilon = {epsilon}")));
        }
        if spec.n_theta < 8 || spec.interior_spacing <= 0.0 || spec.interior_spacing > 0.5 {
            return Err(Error::InvalidGrid("mesh spec out of range".into()));
        }
        // Scaled-radius spacing that keeps the physical normal spacing at or
        // below epsilon / cells_per_epsilon everywhere on the boundary.
        let scale = boundary.r_max();
        let fine = (epsilon / spec.cells_per_epsilon as f64 / scale).min(spec.interior_spacing);
        let band = (spec.band_width * epsilon / scale).min(0.5);
        let mut depths = vec![0.0];
        let mut d = 0.0;
        let mut h = fine;
        let mut layer_depth = None;
        loop {
            if d + 1e-12 >= band {
                h = (h * spec.growth).min(spec.interior_spacing);
                if h >= spec.interior_spacing && layer_depth.is_none() {
                    layer_depth = Some(d * scale);
                }
            }
            if d + h > 1.0 - 0.5 * spec.interior_spacing {
                break;
            }
            d += h;
            depths.push(d);
        }
        let mut rings: Vec<f64> = depths.iter().rev().map(|d| 1.0 - d).collect();
        if rings[0] <= 0.0 {
            rings.remove(0);
        }
        Ok(Self::assemble(
            boundary.clone(),
            rings,
            spec.n_theta,
            layer_depth.unwrap_or(d * scale),
        ))
    }

    fn assemble(boundary: ConvexBoundary, rings: Vec<f64>, n_theta: usize, layer_depth: f64) -> Self {
        let dtheta = 2.0 * PI / n_theta as f64;
        let nr = rings.len();
        let mut nodes = Vec::with_capacity(nr * n_theta);
        let mut weights = Vec::with_capacity(nr * n_theta);
        let mut boundary_flags = Vec::with_capacity(nr * n_theta);
        // Trapezoid weights in s for the integrand s r^2, with the core disk
        // [0, s_0] lumped onto the innermost ring.
        let mut ring_w = vec![0.0; nr];
        ring_w[0] += 0.5 * rings[0] * rings[0];
        for k in 0..nr - 1 {
            let ds = rings[k + 1] - rings[k];
            ring_w[k] += 0.5 * ds * rings[k];
            ring_w[k + 1] += 0.5 * ds * rings[k + 1];
        }
        for (k, &s) in rings.iter().enumerate() {
            for l in 0..n_theta {
                let theta = l as f64 * dtheta;
                let r = boundary.radius(theta);
                nodes.push(Vec2::new(s * r * theta.cos(), s * r * theta.sin()));
                weights.push(ring_w[k] * r * r * dtheta);
                boundary_flags.push(k == nr - 1);
            }
        }
        Self {
            boundary,
            rings,
            n_theta,
            nodes,
            weights,
            boundary_flags,
            layer_depth,
        }
    }

    /// Every radial cell bisected (including a new innermost ring at
    /// `s_0 / 2`) and twice as many sectors; coarse nodes are kept.
    pub fn refined(&self) -> Self {
        let mut rings = vec![0.5 * self.rings[0]];
        for w in self.rings.windows(2) {
            rings.push(w[0]);
            rings.push(0.5 * (w[0] + w[1]));
        }
        rings.push(1.0);
        Self::assemble(self.boundary.clone(), rings, 2 * self.n_theta, self.layer_depth)
    }

    pub fn boundary(&self) -> &ConvexBoundary {
        &self.boundary
    }

    pub fn rings(&self) -> &[f64] {
        &self.rings
    }

    pub fn n_rings(&self) -> usize {
        self.rings.len()
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    pub fn nodes(&self) -> &[Vec2] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Area weights: `sum_i weights[i] v_i` approximates `int_Omega v dx`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn boundary_flags(&self) -> &[bool] {
        &self.boundary_flags
    }

    /// Physical depth of the refined boundary band.
    pub fn layer_depth(&self) -> f64 {
        self.layer_depth
    }

    pub fn index(&self, ring: usize, sector: usize) -> usize {
        ring * self.n_theta + sector
    }

    pub fn theta(&self, sector: usize) -> f64 {
        sector as f64 * 2.0 * PI / self.n_theta as f64
    }

    /// Smallest radial spacing in the scaled radius.
    pub fn min_spacing(&self) -> f64 {
        self.rings
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }

    /// Local radial spacing (scaled radius) at `s`.
    pub fn local_spacing(&self, s: f64) -> f64 {
        let k = self.ring_cell(s);
        match k {
            None => self.rings[0],
            Some(k) => self.rings[k + 1] - self.rings[k],
        }
    }

    fn ring_cell(&self, s: f64) -> Option<usize> {
        if s < self.rings[0] {
            return None;
        }
        let nr = self.rings.len();
        let k = match self.rings.binary_search_by(|v| v.partial_cmp(&s).unwrap()) {
            Ok(i) => i.min(nr - 2),
            Err(i) => (i - 1).min(nr - 2),
        };
        Some(k)
    }

    /// Polar coordinates `(s, theta)` of a point.
    pub fn polar(&self, x: Vec2) -> (f64, f64) {
        let theta = x.y.atan2(x.x);
        let rho = x.norm();
        if rho == 0.0 {
            return (0.0, 0.0);
        }
        (rho / self.boundary.radius(theta), theta)
    }

    /// Appends the interpolation stencil `(node, weight)` for `x` to `out`.
    /// Weights are nonnegative and sum to one.
    pub fn stencil(&self, x: Vec2, out: &mut Vec<(usize, f64)>) {
        let (s, theta) = self.polar(x);
        let s = s.min(1.0);
        let dtheta = 2.0 * PI / self.n_theta as f64;
        let a = theta.rem_euclid(2.0 * PI) / dtheta;
        let l0 = (a.floor() as usize) % self.n_theta;
        let l1 = (l0 + 1) % self.n_theta;
        let ta = (a - a.floor()).clamp(0.0, 1.0);
        match self.ring_cell(s) {
            None => {
                let t = s / self.rings[0];
                let c = (1.0 - t) / self.n_theta as f64;
                for l in 0..self.n_theta {
                    out.push((l, c));
                }
                out.push((l0, t * (1.0 - ta)));
                out.push((l1, t * ta));
            }
            Some(k) => {
                let tr = ((s - self.rings[k]) / (self.rings[k + 1] - self.rings[k])).clamp(0.0, 1.0);
                out.push((self.index(k, l0), (1.0 - tr) * (1.0 - ta)));
                out.push((self.index(k, l1), (1.0 - tr) * ta));
                out.push((self.index(k + 1, l0), tr * (1.0 - ta)));
                out.push((self.index(k + 1, l1), tr * ta));
            }
        }
    }

    pub fn interpolate(&self, values: &[f64], x: Vec2) -> f64 {
        let mut st = Vec::with_capacity(4);
        self.stencil(x, &mut st);
        st.iter().map(|&(i, w)| w * values[i]).sum()
    }

    /// Indices in this mesh of the nodes of a coarser mesh related by
    /// [`SpatialMesh::refined`] (possibly repeatedly).
    pub fn nested_indices(&self, coarse: &SpatialMesh) -> Option<Vec<usize>> {
        if !self.n_theta.is_multiple_of(coarse.n_theta) {
            return None;
        }
        let step = self.n_theta / coarse.n_theta;
        let mut ring_map = Vec::with_capacity(coarse.rings.len());
        for &s in &coarse.rings {
            let k = self
                .rings
                .iter()
                .position(|&t| (t - s).abs() < 1e-13)?;
            ring_map.push(k);
        }
        let mut out = Vec::with_capacity(coarse.len());
        for &k in &ring_map {
            for l in 0..coarse.n_theta {
                out.push(self.index(k, l * step));
            }
        }
        Some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn uniform_eta_grid_small() {
        let g = EtaGrid::new(1.0, 4, EtaGrading::Uniform).unwrap();
        let expect = [0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0];
        for (a, b) in g.nodes().iter().zip(expect) {
            assert_relative_eq!(*a, b, epsilon = 1e-15);
        }
        assert_eq!(g.length(), 1.0);
    }

    #[test]
    fn graded_eta_grid() {
        let eps = 0.1;
        let g = EtaGrid::new(eps, 33, EtaGrading::Geometric).unwrap();
        let n = g.nodes();
        assert_eq!(n[0], 0.0);
        assert_relative_eq!(*n.last().unwrap(), eps.powf(-0.5), epsilon = 1e-12);
        let uniform = g.length() / 32.0;
        assert!(n[1] <= eps * uniform * (1.0 + 1e-9));
        assert!(n.windows(2).all(|w| w[1] > w[0]));
        let h: Vec<f64> = n.windows(2).map(|w| w[1] - w[0]).collect();
        assert!(h[0] <= h[h.len() - 1]);
        let cells = h.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-9));
        assert!(cells);
    }

    #[test]
    fn eta_refinement_is_nested() {
        let g = EtaGrid::new(0.1, 9, EtaGrading::Geometric).unwrap();
        let r = g.refined();
        assert_eq!(r.len(), 17);
        for (i, &x) in g.nodes().iter().enumerate() {
            assert_eq!(r.nodes()[2 * i], x);
        }
    }

    #[test]
    fn phi_grid_symmetry_and_weights() {
        for beta in [0.0, 0.5, 0.9] {
            let g = PhiGrid::new(32, beta).unwrap();
            let s: f64 = g.weights().iter().sum();
            assert_relative_eq!(s, 2.0 * PI, epsilon = 1e-12);
            for j in 0..g.len() {
                assert_eq!(g.nodes()[g.reflect(j)], -g.nodes()[j]);
                assert!(g.weights()[j] > 0.0);
                assert!(g.nodes()[j] >= -PI && g.nodes()[j] < PI);
            }
            assert!(g.nodes().windows(2).all(|w| w[1] > w[0]));
        }
    }

    #[test]
    fn phi_clustering_fraction() {
        let g = PhiGrid::clustered(64).unwrap();
        let near = g.nodes().iter().filter(|p| p.sin().abs() < 0.1).count();
        assert!(near as f64 >= 0.25 * g.len() as f64, "{near}");
    }

    #[test]
    fn averages() {
        let g = PhiGrid::clustered(48).unwrap();
        let ones = vec![3.0; g.len()];
        assert_relative_eq!(g.average(&ones), 3.0, epsilon = 1e-14);
        let s: Vec<f64> = g.nodes().iter().map(|p| p.sin()).collect();
        assert!(g.average(&s).abs() < 1e-15);
        let s2: Vec<f64> = g.nodes().iter().map(|p| p.sin().powi(2)).collect();
        assert_relative_eq!(g.average(&s2), 0.5, epsilon = 1e-12);
        let o = Ordinates::new(16).unwrap();
        let c: Vec<f64> = o.angles().iter().map(|p| p.cos().powi(2)).collect();
        assert_relative_eq!(o.average(&c), 0.5, epsilon = 1e-14);
    }

    #[test]
    fn phi_interpolation_periodic() {
        let g = PhiGrid::clustered(32).unwrap();
        let v: Vec<f64> = g.nodes().iter().map(|p| p.cos()).collect();
        for k in 0..200 {
            let phi = -PI + 2.0 * PI * k as f64 / 200.0;
            assert!((g.interpolate(&v, phi) - phi.cos()).abs() < 0.02);
        }
        assert_relative_eq!(g.interpolate(&v, g.nodes()[5]), v[5], epsilon = 1e-14);
    }

    #[test]
    fn ordinate_symmetry() {
        let o = Ordinates::new(12).unwrap();
        for j in 0..6 {
            let a = o.velocity(j);
            let b = o.velocity(j + 6);
            assert!((a + b).norm() < 1e-15);
        }
        assert_relative_eq!(o.weights().iter().sum::<f64>(), 2.0 * PI, epsilon = 1e-14);
    }

    #[test]
    fn mesh_area_and_band() {
        let b = ConvexBoundary::unit_disk();
        let eps = 0.1;
        let m = SpatialMesh::new(&b, eps, 16).unwrap();
        assert_relative_eq!(m.weights().iter().sum::<f64>(), PI, epsilon = 1e-12);
        let band: Vec<f64> = m
            .rings()
            .iter()
            .filter(|&&s| s >= 1.0 - eps - 1e-12)
            .copied()
            .collect();
        assert!(band.len() >= 9);
        for x in m.nodes() {
            assert!(b.contains(*x));
        }
        let e = ConvexBoundary::new(vec![1.0, 0.1]).unwrap();
        let m = SpatialMesh::new(&e, eps, 16).unwrap();
        // Area of r = 1 + 0.1 cos 2theta is pi (1 + 0.01/2).
        assert_relative_eq!(m.weights().iter().sum::<f64>(), PI * 1.005, epsilon = 1e-10);
    }

    #[test]
    fn mesh_refinement_nested_and_interpolation() {
        let b = ConvexBoundary::new(vec![1.0, 0.05]).unwrap();
        let m = SpatialMesh::new(&b, 0.2, 8).unwrap();
        let r = m.refined();
        let idx = r.nested_indices(&m).unwrap();
        for (i, &j) in idx.iter().enumerate() {
            assert!((m.nodes()[i] - r.nodes()[j]).norm() < 1e-13);
        }
        let f = |x: Vec2| 1.0 + 0.3 * x.x - 0.2 * x.y;
        let v: Vec<f64> = m.nodes().iter().map(|&x| f(x)).collect();
        for i in 0..m.len() {
            assert_relative_eq!(m.interpolate(&v, m.nodes()[i]), v[i], epsilon = 1e-12);
        }
        let mut st = Vec::new();
        m.stencil(Vec2::new(0.001, 0.0), &mut st);
        assert_relative_eq!(st.iter().map(|p| p.1).sum::<f64>(), 1.0, epsilon = 1e-14);
        assert!((m.interpolate(&v, Vec2::new(0.4, 0.3)) - f(Vec2::new(0.4, 0.3))).abs() < 1e-2);
    }
}
