//! Damped fixed-point iteration with optional Anderson acceleration.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointConfig {
    pub tol: f64,
    pub max_iter: usize,
    /// Relaxation `omega` in `x <- (1 - omega) x + omega G(x)`.
    pub damping: f64,
    /// Anderson window; 0 disables acceleration.
    pub window: usize,
}

impl Default for FixedPointConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 500,
            damping: 1.0,
            window: 3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FixedPointOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub history: Vec<f64>,
}

/// Iterates `x <- G(x)` until `residual(x, G(x)) <= tol`.
///
/// `residual` receives the current iterate and its image so callers can
/// measure convergence in whatever norm matters to them.
pub fn solve<G, N>(
    what: &'static str,
    x0: Vec<f64>,
    mut map: G,
    mut residual: N,
    cfg: &FixedPointConfig,
) -> Result<FixedPointOutcome>
where
    G: FnMut(&[f64]) -> Vec<f64>,
    N: FnMut(&[f64], &[f64]) -> f64,
{
    let n = x0.len();
    let mut x = x0;
    let mut history = Vec::new();
    let mut dx: VecDeque<Vec<f64>> = VecDeque::new();
    let mut dr: VecDeque<Vec<f64>> = VecDeque::new();
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;

    for it in 1..=cfg.max_iter {
        let gx = map(&x);
        let res = residual(&x, &gx);
        history.push(res);
        if !res.is_finite() {
            break;
        }
        if res <= cfg.tol {
            return Ok(FixedPointOutcome {
                x: gx,
                iterations: it,
                residual: res,
                history,
            });
        }
        let r: Vec<f64> = gx.iter().zip(&x).map(|(g, v)| g - v).collect();

        if cfg.window > 0 {
            if let Some((px, pr)) = prev.take() {
                dx.push_back(x.iter().zip(&px).map(|(a, b)| a - b).collect());
                dr.push_back(r.iter().zip(&pr).map(|(a, b)| a - b).collect());
                if dx.len() > cfg.window {
                    dx.pop_front();
                    dr.pop_front();
                }
            }
            prev = Some((x.clone(), r.clone()));
        }

        let mut next: Vec<f64> = x.iter().zip(&r).map(|(v, d)| v + cfg.damping * d).collect();
        if !dr.is_empty() {
            let m = dr.len();
            let a = DMatrix::from_fn(n, m, |i, j| dr[j][i]);
            let b = DVector::from_column_slice(&r);
            if let Some(gamma) = least_squares(&a, &b) {
                for (j, g) in gamma.iter().enumerate() {
                    for i in 0..n {
                        next[i] -= g * (dx[j][i] + cfg.damping * dr[j][i]);
                    }
                }
            }
        }
        x = next;
    }
    Err(Error::NoConvergence {
        what,
        iterations: cfg.max_iter,
        residual: history.last().copied().unwrap_or(f64::NAN),
    })
}

fn least_squares(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    if !(smax > 0.0) {
        return None;
    }
    svd.solve(b, smax * 1e-12).ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sup(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn linear_contraction() {
        // x = 0.95 A x + b with a slowly contracting map.
        let n = 20;
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let map = |x: &[f64]| -> Vec<f64> {
            (0..n)
                .map(|i| {
                    let l = x[(i + n - 1) % n];
                    let r = x[(i + 1) % n];
                    0.95 * 0.5 * (l + r) + b[i]
                })
                .collect()
        };
        let plain = solve(
            "plain",
            vec![0.0; n],
            map,
            sup,
            &FixedPointConfig {
                window: 0,
                max_iter: 2000,
                ..Default::default()
            },
        )
        .unwrap();
        let acc = solve("anderson", vec![0.0; n], map, sup, &FixedPointConfig::default()).unwrap();
        assert!(acc.iterations < plain.iterations / 2, "{} vs {}", acc.iterations, plain.iterations);
        assert!(sup(&acc.x, &plain.x) < 1e-8);
    }

    #[test]
    fn reports_failure() {
        let r = solve(
            "divergent",
            vec![1.0],
            |x| vec![2.0 * x[0] + 1.0],
            sup,
            &FixedPointConfig {
                window: 0,
                max_iter: 10,
                ..Default::default()
            },
        );
        assert!(matches!(r, Err(Error::NoConvergence { .. })));
    }
}
