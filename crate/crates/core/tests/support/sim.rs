//! Exact samples from a discretized state-space prior.

#![allow(dead_code)]

use ihgp_core::{DiscreteModel, Mat, Vector};
use rand::Rng;
use rand_distr::StandardNormal;

fn factor(p: &Mat) -> Mat {
    // Jitter keeps rank-deficient Q (e.g. purely periodic parts) factorable.
    let n = p.nrows();
    let scale = p.diagonal().amax().max(1e-300);
    p.clone()
        .cholesky()
        .or_else(|| (p + Mat::identity(n, n) * (1e-12 * scale)).cholesky())
        .expect("covariance factor")
        .unpack()
}

fn normal_vec(rng: &mut impl Rng, n: usize) -> Vector {
    Vector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)))
}

/// Latent path `f_i = hᵀ x_i` of length `n` started from the stationary law.
pub fn sample_latent(model: &DiscreteModel, n: usize, rng: &mut impl Rng) -> Vec<f64> {
    let m = model.dim();
    let l0 = factor(&model.p0);
    let lq = factor(&model.q);
    let mut x = &l0 * normal_vec(rng, m);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        if i > 0 {
            x = &model.a * &x + &lq * normal_vec(rng, m);
        }
        out.push(model.h.dot(&x));
    }
    out
}

/// Latent path plus Gaussian noise of variance `noise_var`.
pub fn sample_observations(
    model: &DiscreteModel,
    n: usize,
    noise_var: f64,
    rng: &mut impl Rng,
) -> (Vec<f64>, Vec<f64>) {
    let f = sample_latent(model, n, rng);
    let sd = noise_var.sqrt();
    let y = f.iter().map(|v| v + sd * rng.sample::<f64, _>(StandardNormal)).collect();
    (f, y)
}
