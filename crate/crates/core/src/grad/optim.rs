//! BFGS with Armijo backtracking for smooth objectives in log space.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::{Error, Mat, Result, Vector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimOptions {
    pub max_iters: usize,
    /// Stop once `‖∇f‖∞` falls below this.
    pub grad_tol: f64,
    /// Cap on `‖Δθ‖∞` per iteration (log units).
    pub max_step: f64,
    /// Armijo sufficient-decrease constant.
    pub armijo: f64,
    pub max_backtracks: usize,
}

impl Default for OptimOptions {
    fn default() -> Self {
        OptimOptions {
            max_iters: 200,
            grad_tol: 1e-5,
            max_step: 2.0,
            armijo: 1e-4,
            max_backtracks: 40,
        }
    }
}

/// One iteration of the optimizer trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    pub iteration: usize,
    pub value: f64,
    pub grad_norm: f64,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimResult {
    pub theta: Vec<f64>,
    pub value: f64,
    pub grad: Vec<f64>,
    pub iterations: usize,
    /// Number of accepted line-search steps.
    pub accepted_steps: usize,
    pub converged: bool,
    pub trace: Vec<TraceEntry>,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, b| a.max(b.abs()))
}

/// Minimize `f` from `theta0`. Errors from `f` during the line search count
/// as `+∞`; an error at the starting point is returned.
pub fn minimize(
    mut f: impl FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
    theta0: &[f64],
    opts: &OptimOptions,
) -> Result<OptimResult> {
    let n = theta0.len();
    let mut x = Vector::from_column_slice(theta0);
    let (mut fx, g0) = f(theta0)?;
    if !fx.is_finite() || g0.iter().any(|g| !g.is_finite()) {
        return Err(Error::Degenerate {
            step: 0,
            value: fx,
        });
    }
    let mut g = Vector::from_vec(g0);
    let mut hinv = Mat::identity(n, n);
    let mut trace = Vec::new();
    let mut accepted = 0;
    let mut converged = inf_norm(g.as_slice()) <= opts.grad_tol;
    trace.push(TraceEntry {
        iteration: 0,
        value: fx,
        grad_norm: inf_norm(g.as_slice()),
        step: 0.0,
    });
    let mut iterations = 0;
    while !converged && iterations < opts.max_iters {
        iterations += 1;
        let mut p = -(&hinv * &g);
        let mut slope = g.dot(&p);
        if !(slope < 0.0) {
            // Not a descent direction: reset the curvature estimate.
            hinv = Mat::identity(n, n);
            p = -g.clone();
            slope = g.dot(&p);
        }
        let pmax = inf_norm(p.as_slice());
        if pmax > opts.max_step {
            p *= opts.max_step / pmax;
            slope = g.dot(&p);
        }
        let mut t = 1.0;
        let mut next = None;
        for _ in 0..opts.max_backtracks {
            let cand = &x + &p * t;
            if let Ok((fc, gc)) = f(cand.as_slice()) {
                if fc.is_finite()
                    && gc.iter().all(|v| v.is_finite())
                    && fc <= fx + opts.armijo * t * slope
                {
                    next = Some((cand, fc, Vector::from_vec(gc)));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((xn, fnext, gn)) = next else {
            break;
        };
        accepted += 1;
        let s = &xn - &x;
        let yv = &gn - &g;
        let sy = s.dot(&yv);
        if sy > 1e-12 * s.norm() * yv.norm() {
            if accepted == 1 {
                // Scale the initial inverse Hessian to the observed curvature.
                hinv *= sy / yv.dot(&yv);
            }
            let rho = 1.0 / sy;
            let hy = &hinv * &yv;
            let yhy = yv.dot(&hy);
            hinv += (&s * s.transpose()) * (rho * rho * yhy + rho)
                - (&hy * s.transpose() + &s * hy.transpose()) * rho;
        }
        let improvement = fx - fnext;
        x = xn;
        fx = fnext;
        g = gn;
        let gnorm = inf_norm(g.as_slice());
        trace.push(TraceEntry {
            iteration: iterations,
            value: fx,
            grad_norm: gnorm,
            step: t * inf_norm(p.as_slice()),
        });
        converged = gnorm <= opts.grad_tol;
        if !converged && improvement.abs() <= 1e-15 * fx.abs() && s.norm() <= 1e-12 {
            break;
        }
    }
    Ok(OptimResult {
        theta: x.as_slice().to_vec(),
        value: fx,
        grad: g.as_slice().to_vec(),
        iterations,
        accepted_steps: accepted,
        converged,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| {
            let (a, b) = (x[0], x[1]);
            let v = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
            let g = vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)];
            Ok((v, g))
        };
        let r = minimize(f, &[-1.2, 1.0], &OptimOptions { max_iters: 500, ..Default::default() }).unwrap();
        assert!(r.converged);
        assert!((r.theta[0] - 1.0).abs() < 1e-6 && (r.theta[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn restart_at_optimum_takes_no_step() {
        let f = |x: &[f64]| Ok(((x[0] - 3.0).powi(2), vec![2.0 * (x[0] - 3.0)]));
        let r = minimize(f, &[0.0], &OptimOptions::default()).unwrap();
        let again = minimize(f, &r.theta, &OptimOptions::default()).unwrap();
        assert!(again.accepted_steps <= 1);
    }

    #[test]
    fn errors_count_as_infinite() {
        // Domain x < 2; minimum of (x−3)² over it is approached from below.
        let f = |x: &[f64]| {
            if x[0] >= 2.0 {
                Err(Error::ParameterDomain("out of domain".into()))
            } else {
                Ok(((x[0] - 3.0).powi(2), vec![2.0 * (x[0] - 3.0)]))
            }
        };
        let r = minimize(f, &[0.0], &OptimOptions { max_iters: 30, ..Default::default() }).unwrap();
        assert!(r.theta[0] < 2.0 && r.theta[0] > 1.9);
    }
}
