//! Discrete mild-formulation operators on an `EtaGrid x PhiGrid`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::discretization::{EtaGrid, PhiGrid};
use crate::milne::tracer::{CharacteristicTracer, PathEnd};

/// Precomputed characteristic data for one `(epsilon, R_kappa, grids)`.
///
/// For every node the operator stores the in-flow weight `e^{-G}` with its
/// in-flow angle, and the row of the linear map from nodal `f_bar` values
/// (interpolated linearly in `eta`) to `T[f_bar]` at the node. The
/// operator is independent of the data, so one instance serves any number
/// of solves.
#[derive(Debug, Clone)]
pub struct MilneOperator {
    tracer: CharacteristicTracer,
    eta: EtaGrid,
    phi: PhiGrid,
    ends: Vec<PathEnd>,
    kernel: DMatrix<f64>,
    reduced: DMatrix<f64>,
    interpolation: MeanInterpolation,
}

/// How `f_bar` is reconstructed between `eta` nodes inside `T`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeanInterpolation {
    /// Piecewise linear: nonnegative weights, discrete maximum principle.
    #[default]
    Linear,
    /// Four-point Lagrange: higher order, weights may change sign.
    Cubic,
}

impl MilneOperator {
    pub fn new(tracer: CharacteristicTracer, eta: EtaGrid, phi: PhiGrid) -> Self {
        Self::with_interpolation(tracer, eta, phi, MeanInterpolation::Linear)
    }

    pub fn with_interpolation(
        tracer: CharacteristicTracer,
        eta: EtaGrid,
        phi: PhiGrid,
        interpolation: MeanInterpolation,
    ) -> Self {
        let (ne, np) = (eta.len(), phi.len());
        let nodes = eta.nodes();
        let mut kernel = DMatrix::zeros(ne * np, ne);
        let mut ends = Vec::with_capacity(ne * np);
        for i in 0..ne {
            for j in 0..np {
                let row = i * np + j;
                let end = tracer.walk(nodes[i], phi.nodes()[j], nodes, |cell, panel| match interpolation {
                    MeanInterpolation::Linear => {
                        let (a, b) = (nodes[cell], nodes[cell + 1]);
                        let t: f64 = panel
                            .samples
                            .iter()
                            .map(|s| s.weight * (s.eta - a) / (b - a))
                            .sum();
                        kernel[(row, cell)] += panel.mass * (1.0 - t);
                        kernel[(row, cell + 1)] += panel.mass * t;
                    }
                    MeanInterpolation::Cubic => {
                        let first = cell.saturating_sub(1).min(ne.saturating_sub(4));
                        let st = &nodes[first..first + 4];
                        for s in &panel.samples {
                            for m in 0..4 {
                                let mut l = 1.0;
                                for n in 0..4 {
                                    if n != m {
                                        l *= (s.eta - st[n]) / (st[m] - st[n]);
                                    }
                                }
                                kernel[(row, first + m)] += panel.mass * s.weight * l;
                            }
                        }
                    }
                });
                ends.push(end);
            }
        }
        let mut reduced = DMatrix::zeros(ne, ne);
        let w = phi.weights();
        let two_pi = 2.0 * std::f64::consts::PI;
        for i in 0..ne {
            for j in 0..np {
                let row = i * np + j;
                for k in 0..ne {
                    reduced[(i, k)] += w[j] * kernel[(row, k)] / two_pi;
                }
            }
        }
        Self {
            tracer,
            eta,
            phi,
            ends,
            kernel,
            reduced,
            interpolation,
        }
    }

    pub fn tracer(&self) -> &CharacteristicTracer {
        &self.tracer
    }

    pub fn eta(&self) -> &EtaGrid {
        &self.eta
    }

    pub fn phi(&self) -> &PhiGrid {
        &self.phi
    }

    pub fn n_nodes(&self) -> usize {
        self.ends.len()
    }

    pub fn path_end(&self, i: usize, j: usize) -> &PathEnd {
        &self.ends[i * self.phi.len() + j]
    }

    /// `K[h]` at every node.
    pub fn apply_k(&self, h: &dyn Fn(f64) -> f64) -> Vec<f64> {
        self.ends
            .iter()
            .map(|e| {
                let w = (-e.depth).exp();
                if w == 0.0 {
                    0.0
                } else {
                    w * h(e.inflow_phi)
                }
            })
            .collect()
    }

    pub fn interpolation(&self) -> MeanInterpolation {
        self.interpolation
    }

    /// `T[H]` for a field given on the grid, interpolated along each
    /// characteristic: linearly in `phi`, and in `eta` with the same
    /// reconstruction as `f_bar`.
    pub fn apply_t(&self, field: &[f64]) -> Vec<f64> {
        let (ne, np) = (self.eta.len(), self.phi.len());
        let nodes = self.eta.nodes();
        let mut out = vec![0.0; ne * np];
        for i in 0..ne {
            for j in 0..np {
                let mut acc = 0.0;
                self.tracer.walk(nodes[i], self.phi.nodes()[j], nodes, |cell, panel| {
                    let mut v = 0.0;
                    for s in &panel.samples {
                        let (j0, j1, u) = self.phi.bracket(s.phi);
                        let at = |k: usize| (1.0 - u) * field[k * np + j0] + u * field[k * np + j1];
                        v += s.weight
                            * match self.interpolation {
                                MeanInterpolation::Linear => {
                                    let (a, b) = (nodes[cell], nodes[cell + 1]);
                                    let t = (s.eta - a) / (b - a);
                                    (1.0 - t) * at(cell) + t * at(cell + 1)
                                }
                                MeanInterpolation::Cubic => {
                                    let first = cell.saturating_sub(1).min(ne.saturating_sub(4));
                                    let st = &nodes[first..first + 4];
                                    (0..4)
                                        .map(|m| {
                                            let l: f64 = (0..4)
                                                .filter(|&n| n != m)
                                                .map(|n| (s.eta - st[n]) / (st[m] - st[n]))
                                                .product();
                                            l * at(first + m)
                                        })
                                        .sum::<f64>()
                                }
                            };
                    }
                    acc += panel.mass * v;
                });
                out[i * np + j] = acc;
            }
        }
        out
    }

    /// `T[q]` for a function of `eta` alone given by nodal values.
    pub fn apply_t_mean(&self, q: &[f64]) -> Vec<f64> {
        let v = &self.kernel * DVector::from_column_slice(q);
        v.as_slice().to_vec()
    }

    /// Angular average of `T[q]`: the matrix `P` of the reduced system
    /// `q = b + P q`.
    pub fn reduced(&self) -> &DMatrix<f64> {
        &self.reduced
    }

    pub fn kernel(&self) -> &DMatrix<f64> {
        &self.kernel
    }

    /// Angular averages of a nodal field, one per `eta` node.
    pub fn average_rows(&self, field: &[f64]) -> Vec<f64> {
        let np = self.phi.len();
        field.chunks(np).map(|row| self.phi.average(row)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::EtaGrading;

    fn op(eps: f64) -> MilneOperator {
        let l = eps.powf(-0.5);
        MilneOperator::new(
            CharacteristicTracer::new(eps, 1.0, l).unwrap(),
            EtaGrid::new(eps, 25, EtaGrading::Geometric).unwrap(),
            PhiGrid::clustered(32).unwrap(),
        )
    }

    #[test]
    fn constants_are_reproduced() {
        let o = op(0.1);
        let k = o.apply_k(&|_| 1.0);
        let t = o.apply_t_mean(&vec![1.0; o.eta().len()]);
        let t2 = o.apply_t(&vec![1.0; o.n_nodes()]);
        for n in 0..o.n_nodes() {
            assert!((k[n] + t[n] - 1.0).abs() < 1e-12);
            assert!((t[n] - t2[n]).abs() < 1e-12);
            assert!(k[n] <= 1.0 && t[n] >= 0.0);
        }
    }

    #[test]
    fn kernel_is_nonnegative() {
        let o = op(0.05);
        assert!(o.kernel().iter().all(|&v| v >= 0.0));
        for i in 0..o.eta().len() {
            let s: f64 = o.reduced().row(i).iter().sum();
            assert!(s < 1.0);
        }
    }

    #[test]
    fn k_decays_at_least_like_e_minus_eta() {
        let o = op(0.1);
        let k = o.apply_k(&|_| 1.0);
        let np = o.phi().len();
        for (i, &eta) in o.eta().nodes().iter().enumerate() {
            for j in 0..np {
                assert!(k[i * np + j] <= (-eta).exp() + 1e-15);
            }
        }
    }
}
