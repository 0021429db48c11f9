//! Post-processing of half-space solutions: far-field value, flux, decay,
//! and finite-difference derivative fields.

use crate::milne::MilneSolution;

/// `f_L = <sin^2 phi, f>(L) / <sin^2 phi, 1>` with the grid quadrature in
/// both numerator and denominator.
pub fn extract_f_l(sol: &MilneSolution) -> f64 {
    let last = sol.eta.len() - 1;
    let row = sol.row(last);
    let mut num = 0.0;
    let mut den = 0.0;
    for ((p, w), v) in sol.phi.nodes().iter().zip(sol.phi.weights()).zip(row) {
        let s2 = p.sin().powi(2);
        num += w * s2 * v;
        den += w * s2;
    }
    num / den
}

/// `<sin phi, f>(eta_i)`.
pub fn flux(sol: &MilneSolution, eta_index: usize) -> f64 {
    let row = sol.row(eta_index);
    sol.phi
        .nodes()
        .iter()
        .zip(sol.phi.weights())
        .zip(row)
        .map(|((p, w), v)| w * p.sin() * v)
        .sum()
}

pub fn flux_profile(sol: &MilneSolution) -> Vec<f64> {
    (0..sol.eta.len()).map(|i| flux(sol, i)).collect()
}

/// `sup_eta e^{K0 eta} max_phi |f - f_L|`.
pub fn decay_profile(sol: &MilneSolution, k0: f64) -> f64 {
    sol.eta
        .nodes()
        .iter()
        .enumerate()
        .map(|(i, &eta)| {
            let m = sol.row(i).iter().fold(0.0f64, |m, v| m.max((v - sol.f_l).abs()));
            (k0 * eta).exp() * m
        })
        .fold(0.0, f64::max)
}

/// Smallest `A` with `max_phi |f(eta_i) - f_L| <= A e^{-k0 eta_i}` at every node.
pub fn fit_decay_amplitude(sol: &MilneSolution, k0: f64) -> f64 {
    decay_profile(sol, k0)
}

#[derive(Debug, Clone)]
pub struct WeightedDerivatives {
    /// `zeta df/d eta`, row-major like the solution.
    pub zeta_deta: Vec<f64>,
    /// `F cos(phi) df/d phi`.
    pub force_dphi: Vec<f64>,
    /// Unweighted `df/d eta`.
    pub deta: Vec<f64>,
    pub sup_zeta_deta: f64,
    pub sup_force_dphi: f64,
}

/// Finite-difference derivative fields: centred in the interior, one-sided
/// at `eta = 0` and `eta = L`, periodic in `phi`.
pub fn weighted_derivatives(sol: &MilneSolution) -> WeightedDerivatives {
    let tracer = sol.problem.tracer().expect("solution of a valid problem");
    let (ne, np) = (sol.eta.len(), sol.phi.len());
    let x = sol.eta.nodes();
    let ph = sol.phi.nodes();
    let mut zeta_deta = vec![0.0; ne * np];
    let mut force_dphi = vec![0.0; ne * np];
    let mut deta = vec![0.0; ne * np];
    for i in 0..ne {
        for j in 0..np {
            let d = if i == 0 {
                (sol.value(1, j) - sol.value(0, j)) / (x[1] - x[0])
            } else if i == ne - 1 {
                (sol.value(i, j) - sol.value(i - 1, j)) / (x[i] - x[i - 1])
            } else {
                nonuniform_central(
                    x[i - 1],
                    x[i],
                    x[i + 1],
                    sol.value(i - 1, j),
                    sol.value(i, j),
                    sol.value(i + 1, j),
                )
            };
            let jm = (j + np - 1) % np;
            let jp = (j + 1) % np;
            let two_pi = 2.0 * std::f64::consts::PI;
            let pm = if j == 0 { ph[jm] - two_pi } else { ph[jm] };
            let pp = if j == np - 1 { ph[jp] + two_pi } else { ph[jp] };
            let dp = nonuniform_central(
                pm,
                ph[j],
                pp,
                sol.value(i, jm),
                sol.value(i, j),
                sol.value(i, jp),
            );
            let n = i * np + j;
            deta[n] = d;
            zeta_deta[n] = tracer.zeta(x[i], ph[j]) * d;
            force_dphi[n] = sol.problem.force(x[i]) * ph[j].cos() * dp;
        }
    }
    let sup = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    WeightedDerivatives {
        sup_zeta_deta: sup(&zeta_deta),
        sup_force_dphi: sup(&force_dphi),
        zeta_deta,
        force_dphi,
        deta,
    }
}

fn nonuniform_central(x0: f64, x1: f64, x2: f64, f0: f64, f1: f64, f2: f64) -> f64 {
    let h0 = x1 - x0;
    let h1 = x2 - x1;
    (h0 * h0 * (f2 - f1) + h1 * h1 * (f1 - f0)) / (h0 * h1 * (h0 + h1))
}

/// `sup |df/d eta|` (or of `zeta df/d eta` when `weighted`) over nodes with
/// `eta <= eta_max` and `|sin phi| <= sin_max`.
pub fn grazing_eta_derivative_sup(sol: &MilneSolution, eta_max: f64, sin_max: f64, weighted: bool) -> f64 {
    let d = weighted_derivatives(sol);
    let field = if weighted { &d.zeta_deta } else { &d.deta };
    let np = sol.phi.len();
    let mut m = 0.0f64;
    for (i, &eta) in sol.eta.nodes().iter().enumerate() {
        if eta > eta_max {
            break;
        }
        for (j, p) in sol.phi.nodes().iter().enumerate() {
            if p.sin().abs() <= sin_max {
                m = m.max(field[i * np + j].abs());
            }
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::{EtaGrading, EtaGrid, PhiGrid};
    use crate::milne::MilneProblem;
    use approx::assert_relative_eq;

    fn synthetic(f: impl Fn(f64, f64) -> f64) -> MilneSolution {
        let problem = MilneProblem::new(0.1, 1.0).unwrap();
        let eta = EtaGrid::new(0.1, 17, EtaGrading::Geometric).unwrap();
        let phi = PhiGrid::clustered(32).unwrap();
        let mut values = Vec::new();
        for &e in eta.nodes() {
            for &p in phi.nodes() {
                values.push(f(e, p));
            }
        }
        let mean = values.chunks(32).map(|r| phi.average(r)).collect();
        let mut s = MilneSolution {
            problem,
            eta,
            phi,
            values,
            mean,
            f_l: 0.0,
            iterations: 0,
            residual: 0.0,
        };
        s.f_l = extract_f_l(&s);
        s
    }

    #[test]
    fn far_field_of_simple_fields() {
        let s = synthetic(|_, _| 1.7);
        assert_relative_eq!(s.f_l, 1.7, epsilon = 1e-14);
        let s = synthetic(|_, p| 2.0 + p.sin());
        assert_relative_eq!(s.f_l, 2.0, epsilon = 1e-13);
    }

    #[test]
    fn flux_quadrature() {
        let s = synthetic(|_, p| p.sin());
        assert_relative_eq!(flux(&s, 3), std::f64::consts::PI, epsilon = 1e-12);
        let s = synthetic(|_, p| 1.0 + p.cos());
        assert!(flux(&s, 0).abs() < 1e-14);
    }

    #[test]
    fn derivative_fields_of_constant_vanish() {
        let s = synthetic(|_, _| 4.0);
        let d = weighted_derivatives(&s);
        assert_eq!(d.sup_zeta_deta, 0.0);
        assert_eq!(d.sup_force_dphi, 0.0);
        assert_eq!(decay_profile(&s, 0.1), 0.0);
    }

    #[test]
    fn decay_profile_k0_zero_is_sup() {
        let s = synthetic(|e, p| 1.0 + (-e).exp() * p.sin());
        let sup = s.values.iter().fold(0.0f64, |m, v| m.max((v - s.f_l).abs()));
        assert_relative_eq!(decay_profile(&s, 0.0), sup, epsilon = 1e-15);
    }

    #[test]
    fn derivative_of_linear_field() {
        let s = synthetic(|e, _| 3.0 * e);
        let d = weighted_derivatives(&s);
        for v in &d.deta {
            assert_relative_eq!(*v, 3.0, epsilon = 1e-10);
        }
    }
}
