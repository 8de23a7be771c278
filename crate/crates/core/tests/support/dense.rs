//! Dense kernel-matrix GP used as an independent oracle. Kernels are evaluated
//! from their closed forms; nothing here goes through the state-space code.

#![allow(dead_code)]

use ihgp_core::{KernelSpec, MaternOrder};
use nalgebra::{DMatrix, DVector};

/// `e^{-x} I_j(x)` for `j = 0..=n` by direct power series.
pub fn scaled_bessel_series(n: usize, x: f64) -> Vec<f64> {
    (0..=n)
        .map(|j| {
            let half = 0.5 * x;
            let mut term = half.powi(j as i32) / (1..=j).map(|k| k as f64).product::<f64>();
            let mut sum = term;
            for k in 1..400 {
                term *= half * half / (k as f64 * (k + j) as f64);
                sum += term;
                if term < 1e-18 * sum {
                    break;
                }
            }
            sum * (-x).exp()
        })
        .collect()
}

/// Closed-form stationary covariance at lag `tau` (periodic kernels exact,
/// not truncated).
pub fn kernel(spec: &KernelSpec, tau: f64) -> f64 {
    let r = tau.abs();
    match spec {
        KernelSpec::Matern { order, sigma2, ell } => {
            let s = r / ell;
            match order {
                MaternOrder::Half => sigma2 * (-s).exp(),
                MaternOrder::ThreeHalves => {
                    let a = 3f64.sqrt() * s;
                    sigma2 * (1.0 + a) * (-a).exp()
                }
                MaternOrder::FiveHalves => {
                    let a = 5f64.sqrt() * s;
                    sigma2 * (1.0 + a + a * a / 3.0) * (-a).exp()
                }
            }
        }
        KernelSpec::Periodic { sigma2, ell, period, .. } => {
            let s = (std::f64::consts::PI * r / period).sin();
            sigma2 * (-2.0 * s * s / (ell * ell)).exp()
        }
        KernelSpec::Sum(parts) => parts.iter().map(|p| kernel(p, tau)).sum(),
        KernelSpec::Product(parts) => parts.iter().map(|p| kernel(p, tau)).product(),
    }
}

/// Same as [`kernel`] but with each periodic factor replaced by its
/// `harmonics`-term cosine series renormalized to the full variance.
pub fn truncated_kernel(spec: &KernelSpec, tau: f64) -> f64 {
    match spec {
        KernelSpec::Periodic { sigma2, ell, period, harmonics } => {
            let x = 1.0 / (ell * ell);
            let b = scaled_bessel_series(*harmonics, x);
            let w: Vec<f64> = (0..=*harmonics)
                .map(|j| if j == 0 { b[0] } else { 2.0 * b[j] })
                .collect();
            let total: f64 = w.iter().sum();
            let omega = 2.0 * std::f64::consts::PI / period;
            sigma2 * w.iter().enumerate().map(|(j, wj)| wj * (j as f64 * omega * tau).cos()).sum::<f64>()
                / total
        }
        KernelSpec::Sum(parts) => parts.iter().map(|p| truncated_kernel(p, tau)).sum(),
        KernelSpec::Product(parts) => parts.iter().map(|p| truncated_kernel(p, tau)).product(),
        other => kernel(other, tau),
    }
}

pub struct DensePosterior {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    pub log_lik: f64,
}

/// Exact GP regression on equidistant inputs `t_i = i dt`; NaN entries of `y`
/// are treated as unobserved.
pub fn dense_posterior(spec: &KernelSpec, dt: f64, y: &[f64], noise_var: f64) -> DensePosterior {
    let n = y.len();
    let k = |i: usize, j: usize| truncated_kernel(spec, (i as f64 - j as f64) * dt);
    let obs: Vec<usize> = (0..n).filter(|&i| !y[i].is_nan()).collect();
    let no = obs.len();
    let mut c = DMatrix::from_fn(no, no, |a, b| k(obs[a], obs[b]));
    for a in 0..no {
        c[(a, a)] += noise_var;
    }
    let yo = DVector::from_iterator(no, obs.iter().map(|&i| y[i]));
    let chol = c.cholesky().expect("dense covariance not PD");
    let alpha = chol.solve(&yo);
    let logdet: f64 = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let log_lik = -0.5 * (yo.dot(&alpha) + logdet + no as f64 * (2.0 * std::f64::consts::PI).ln());
    let kx = DMatrix::from_fn(n, no, |i, b| k(i, obs[b]));
    let mean = (&kx * &alpha).iter().copied().collect();
    let v = chol.solve(&kx.transpose());
    let var = (0..n)
        .map(|i| k(i, i) - kx.row(i).transpose().dot(&v.column(i)))
        .collect();
    DensePosterior { mean, var, log_lik }
}
