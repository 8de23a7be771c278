//! Seeded synthetic data sets.

use ihgp_core::ssm::discretize;
use ihgp_core::{DiscreteModel, KernelSpec, Mat, Vector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Poisson, StandardNormal};

use crate::config::SincMode;
use crate::data::Series;
use crate::error::{CliError, CliResult};

/// Input range of the sinc benchmark.
pub const SINC_RANGE: (f64, f64) = (0.0, 12.0);
/// Observation noise variance of the sinc regression benchmark.
pub const SINC_NOISE_VAR: f64 = 0.1;

/// Normalized sinc, `sin(πx)/(πx)` with `sinc(0) = 1`.
pub fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

/// Noise-free benchmark function on the experiment range.
pub fn sinc_truth(x: f64) -> f64 {
    sinc(x - 6.0)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `n` equidistant inputs on [0, 12] with
/// - regression: `y = sinc(x − 6) + ε`, `ε ~ N(0, 0.1)`;
/// - classification: `y = ±1`, the sign of the noise-free function;
/// - thresholded: `y = ±1`, the sign of the regression observation (same
///   noise draws as the regression mode under the same seed);
/// - poisson: `y ~ Poisson(exp(sinc(x − 6)))`.
pub fn gen_sinc(n: usize, seed: u64, mode: SincMode) -> CliResult<Series> {
    if n == 0 {
        return Err(CliError::Config("generate: n must be at least 1".into()));
    }
    let (lo, hi) = SINC_RANGE;
    let dt = if n > 1 { (hi - lo) / (n - 1) as f64 } else { 1.0 };
    let mut r = rng(seed);
    let sd = SINC_NOISE_VAR.sqrt();
    let y = (0..n)
        .map(|i| {
            let f = sinc_truth(lo + i as f64 * dt);
            let sign = |v: f64| if v >= 0.0 { 1.0 } else { -1.0 };
            match mode {
                SincMode::Regression => f + sd * r.sample::<f64, _>(StandardNormal),
                SincMode::Classification => sign(f),
                SincMode::Thresholded => sign(f + sd * r.sample::<f64, _>(StandardNormal)),
                SincMode::Poisson => Poisson::new(f.exp()).expect("positive rate").sample(&mut r),
            }
        })
        .collect();
    Ok(Series::regular(lo, dt, y))
}

fn factor(p: &Mat) -> Mat {
    let n = p.nrows();
    let scale = p.diagonal().amax().max(f64::MIN_POSITIVE);
    p.clone()
        .cholesky()
        .or_else(|| (p + Mat::identity(n, n) * (1e-12 * scale)).cholesky())
        .map(|c| c.unpack())
        .unwrap_or_else(|| Mat::zeros(n, n))
}

fn normal_vec(r: &mut impl Rng, n: usize) -> Vector {
    Vector::from_iterator(n, (0..n).map(|_| r.sample::<f64, _>(StandardNormal)))
}

/// Exact draw of `hᵀxᵢ` for `n` steps of a discrete model, started from
/// its stationary law.
pub fn sample_latent(model: &DiscreteModel, n: usize, r: &mut impl Rng) -> Vec<f64> {
    let m = model.dim();
    let l0 = factor(&model.p0);
    let lq = factor(&model.q);
    let mut x = &l0 * normal_vec(r, m);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        if i > 0 {
            x = &model.a * &x + &lq * normal_vec(r, m);
        }
        out.push(model.h.dot(&x));
    }
    out
}

/// Draw from `spec` plus noise; from index `switch_at` on, the latent path
/// is scaled by `√scale`, i.e. the magnitude hyperparameter by `scale`.
pub fn gen_regime_switch(
    spec: &KernelSpec,
    n: usize,
    dt: f64,
    noise_var: f64,
    switch_at: usize,
    scale: f64,
    seed: u64,
) -> CliResult<Series> {
    if !(scale > 0.0 && noise_var > 0.0) {
        return Err(CliError::Config(
            "generate: scale and noise_var must be positive".into(),
        ));
    }
    let model = discretize(&spec.to_sde()?, dt)?;
    let mut r = rng(seed);
    let f = sample_latent(&model, n, &mut r);
    let sd = noise_var.sqrt();
    let gain = scale.sqrt();
    let y = f
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let v = if i >= switch_at { v * gain } else { *v };
            v + sd * r.sample::<f64, _>(StandardNormal)
        })
        .collect();
    Ok(Series::regular(0.0, dt, y))
}

/// Event times on `[0, t1)` of a Poisson process with intensity `rate(t)`
/// bounded by `max_rate`, by thinning.
pub fn gen_events(rate: impl Fn(f64) -> f64, max_rate: f64, t1: f64, seed: u64) -> CliResult<Vec<f64>> {
    if !(max_rate > 0.0 && t1 > 0.0) {
        return Err(CliError::Config(
            "generate: event rate bound and horizon must be positive".into(),
        ));
    }
    let mut r = rng(seed);
    let gap = Exp::new(max_rate).expect("positive rate");
    let mut t = 0.0;
    let mut out = Vec::new();
    loop {
        t += gap.sample(&mut r);
        if t >= t1 {
            return Ok(out);
        }
        if r.random::<f64>() * max_rate < rate(t) {
            out.push(t);
        }
    }
}

/// Sinusoidal intensity `base + amplitude sin(2π t / period)`.
pub fn sinusoidal_rate(base: f64, amplitude: f64, period: f64) -> impl Fn(f64) -> f64 {
    move |t| base + amplitude * (2.0 * std::f64::consts::PI * t / period).sin()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sinc_values() {
        assert_eq!(sinc(0.0), 1.0);
        assert_eq!(sinc_truth(6.0), 1.0);
        assert!(sinc(1.0).abs() < 1e-15);
    }

    #[test]
    fn noise_variance_in_range() {
        let s = gen_sinc(1000, 7, SincMode::Regression).unwrap();
        let res: Vec<f64> = s.t.iter().zip(&s.y).map(|(x, y)| y - sinc_truth(*x)).collect();
        let mean = res.iter().sum::<f64>() / res.len() as f64;
        let var = res.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (res.len() - 1) as f64;
        assert!((0.08..=0.12).contains(&var), "{var}");
        assert_eq!(s.t[0], 0.0);
        assert!((s.t[999] - 12.0).abs() < 1e-12);
    }

    #[test]
    fn labels_and_determinism() {
        let c = gen_sinc(200, 1, SincMode::Classification).unwrap();
        assert!(c.y.iter().all(|&v| v == 1.0 || v == -1.0));
        let a = gen_sinc(50, 3, SincMode::Poisson).unwrap();
        let b = gen_sinc(50, 3, SincMode::Poisson).unwrap();
        assert_eq!(a, b);
        assert!(a.y.iter().all(|v| *v >= 0.0 && v.fract() == 0.0));
        assert!(gen_sinc(0, 1, SincMode::Regression).is_err());
        let reg = gen_sinc(300, 9, SincMode::Regression).unwrap();
        let thr = gen_sinc(300, 9, SincMode::Thresholded).unwrap();
        assert!(reg.y.iter().zip(&thr.y).all(|(r, l)| (*r >= 0.0) == (*l > 0.0)));
    }
}
