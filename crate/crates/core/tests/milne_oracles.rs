//! Half-space operators against direct integration along characteristics.

use geomilne::milne::*;

const EPS: f64 = 0.1;
const R: f64 = 1.0;

fn force(eta: f64) -> f64 {
    -EPS / (R - EPS * eta)
}

/// Integrates backwards from `(eta, phi)` with RK4 until `eta = 0`.
/// Returns `(depth, inflow angle, int e^{-s} H ds)`.
fn rk4_backward(eta: f64, phi: f64, h_field: &dyn Fn(f64, f64) -> f64) -> (f64, f64, f64) {
    let rhs = |y: [f64; 3], s: f64| -> [f64; 3] {
        [-y[1].sin(), -force(y[0]) * y[1].cos(), (-s).exp() * h_field(y[0], y[1])]
    };
    let ds = 1e-4;
    let mut y = [eta, phi, 0.0];
    let mut s = 0.0;
    loop {
        let k1 = rhs(y, s);
        let k2 = rhs(std::array::from_fn(|i| y[i] + 0.5 * ds * k1[i]), s + 0.5 * ds);
        let k3 = rhs(std::array::from_fn(|i| y[i] + 0.5 * ds * k2[i]), s + 0.5 * ds);
        let k4 = rhs(std::array::from_fn(|i| y[i] + ds * k3[i]), s + ds);
        let next: [f64; 3] = std::array::from_fn(|i| y[i] + ds / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
        if next[0] <= 0.0 {
            let t = y[0] / (y[0] - next[0]);
            let end: [f64; 3] = std::array::from_fn(|i| y[i] + t * (next[i] - y[i]));
            return (s + t * ds, end[1], end[2]);
        }
        y = next;
        s += ds;
    }
}

fn operator(n_eta: usize, n_phi: usize) -> MilneOperator {
    let ctx = MilneContext::new(
        EPS,
        MilneGridSpec {
            n_eta,
            n_phi,
            ..Default::default()
        },
    );
    ctx.operator(R).unwrap()
}

#[test]
fn path_ends_match_integrated_characteristics() {
    let op = operator(33, 32);
    for (i, &eta) in op.eta().nodes().iter().enumerate().step_by(4) {
        for (j, &phi) in op.phi().nodes().iter().enumerate() {
            if phi.sin() < 0.3 {
                continue;
            }
            let (depth, inflow, _) = rk4_backward(eta, phi, &|_, _| 0.0);
            let end = op.path_end(i, j);
            assert!((end.depth - depth).abs() < 1e-8, "depth at ({eta}, {phi})");
            assert!((end.inflow_phi - inflow).abs() < 1e-8, "angle at ({eta}, {phi})");
        }
    }
}

#[test]
fn transport_operator_matches_rk4_on_smooth_field() {
    let h_field = |e: f64, p: f64| (-e).exp() * (1.0 + 0.3 * p.cos());
    let op = operator(129, 128);
    let np = op.phi().len();
    let mut field = Vec::new();
    for &e in op.eta().nodes() {
        for &p in op.phi().nodes() {
            field.push(h_field(e, p));
        }
    }
    let t = op.apply_t(&field);
    let mut worst = 0.0f64;
    for (i, &eta) in op.eta().nodes().iter().enumerate().step_by(16) {
        for (j, &phi) in op.phi().nodes().iter().enumerate().step_by(5) {
            if phi.sin() < 0.3 {
                continue;
            }
            let (_, _, integral) = rk4_backward(eta, phi, &h_field);
            worst = worst.max((t[i * np + j] - integral).abs());
        }
    }
    assert!(worst < 2e-4, "worst = {worst:e}");
}

#[test]
fn in_flow_operator_is_attenuated_datum() {
    let op = operator(33, 32);
    let h = |p: f64| 2.0 + p.cos();
    let k = op.apply_k(&h);
    for (i, &eta) in op.eta().nodes().iter().enumerate().step_by(8) {
        for (j, &phi) in op.phi().nodes().iter().enumerate() {
            if phi.sin() < 0.3 {
                continue;
            }
            let (depth, inflow, _) = rk4_backward(eta, phi, &|_, _| 0.0);
            let expect = (-depth).exp() * h(inflow);
            assert!((k[i * op.phi().len() + j] - expect).abs() < 1e-8);
        }
    }
}

#[test]
fn flux_of_forced_problem_follows_the_source_mean() {
    // Without the angular mean, a source does not change the (zero) flux.
    let mut ctx = MilneContext::new(
        EPS,
        MilneGridSpec {
            n_eta: 65,
            n_phi: 64,
            ..Default::default()
        },
    );
    ctx.interpolation = MeanInterpolation::Cubic;
    let op = ctx.operator(R).unwrap();
    let mut source = Vec::new();
    for &e in op.eta().nodes() {
        for &p in op.phi().nodes() {
            source.push((-e).exp() * p.cos());
        }
    }
    let sol = ctx.solve(&op, &|_| 1.0, Some(&source)).unwrap();
    let worst = flux_profile(&sol).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(worst < 1e-5, "flux = {worst:e}");
}

#[test]
fn doubling_keeps_far_field_value() {
    let h = |p: f64| 1.0 + 0.5 * p.sin();
    let mut vals = Vec::new();
    for (ne, np) in [(65, 64), (129, 128)] {
        let mut ctx = MilneContext::new(
            EPS,
            MilneGridSpec {
                n_eta: ne,
                n_phi: np,
                ..Default::default()
            },
        );
        ctx.interpolation = MeanInterpolation::Cubic;
        vals.push(ctx.solve(&ctx.operator(R).unwrap(), &h, None).unwrap().f_l);
    }
    assert!((vals[0] - vals[1]).abs() < 1e-4, "{vals:?}");
    assert!((vals[1] - geomilne::verify::golden::F_L).abs() < 1e-4);
}
