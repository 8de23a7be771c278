//! Gradients of the steady-state negative log marginal likelihood and
//! hyperparameter learning (batch and online).
//!
//! The objective is the Gaussian steady-state filter evidence
//! `NLL(θ) = (n/2) log 2πŝ + Σ v̂ᵢ²/(2ŝ)`. Its gradient needs one linear
//! (Lyapunov-type) solve per hyperparameter for `∂P̂ᵖ`, after which each step
//! costs two `m×m` matrix–vector products per parameter.

mod online;
mod optim;

pub use online::{online_step, OnlineLearner, OnlineOptions, OnlineStep};
pub use optim::{minimize, OptimOptions, OptimResult, TraceEntry};

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::expm::expm_with_derivative;
use crate::linalg::{solve_discrete_lyapunov, symmetrize};
use crate::special::LN_2PI;
use crate::ssm::{discretize, DiscreteModel, KernelSpec};
use crate::steady::solve_pp_dare;
use crate::{Error, Mat, Result, Vector};

/// Log-domain hyperparameters: the kernel parameters followed by
/// `log σ²_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperParams {
    spec: KernelSpec,
    theta: Vec<f64>,
}

impl HyperParams {
    pub fn new(spec: KernelSpec, noise_var: f64) -> Result<Self> {
        spec.validate()?;
        if !(noise_var > 0.0 && noise_var.is_finite()) {
            return Err(Error::ParameterDomain(format!(
                "noise variance must be positive, got {noise_var}"
            )));
        }
        let mut theta = spec.log_params();
        theta.push(noise_var.ln());
        Ok(HyperParams { spec, theta })
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    /// Parameter names matching [`theta`](Self::theta).
    pub fn names(&self) -> Vec<String> {
        let mut n = self.spec.param_names();
        n.push(String::from("noise_var"));
        n
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn noise_var(&self) -> f64 {
        self.theta[self.theta.len() - 1].exp()
    }

    /// Natural-scale values `exp(θ)`.
    pub fn natural(&self) -> Vec<f64> {
        self.theta.iter().map(|t| t.exp()).collect()
    }

    /// Copy with new log-domain values.
    pub fn with_theta(&self, theta: &[f64]) -> Result<Self> {
        if theta.len() != self.theta.len() {
            return Err(Error::Dimension(format!(
                "expected {} hyperparameters, got {}",
                self.theta.len(),
                theta.len()
            )));
        }
        if let Some(bad) = theta.iter().find(|t| !t.is_finite()) {
            return Err(Error::ParameterDomain(format!(
                "non-finite log hyperparameter {bad}"
            )));
        }
        let k = theta.len() - 1;
        let spec = self.spec.with_log_params(&theta[..k])?;
        Ok(HyperParams {
            spec,
            theta: theta.to_vec(),
        })
    }
}

/// Derivatives of the discrete model with respect to one log-hyperparameter.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSensitivity {
    pub da: Mat,
    pub dq: Mat,
    pub dnoise: f64,
}

/// Discretized model and its sensitivities for every entry of `params`.
///
/// `∂A` is the off-diagonal block of `exp([[F, ∂F], [0, F]] dt)`;
/// `∂Q = ∂P∞ − ∂A P∞ Aᵀ − A ∂P∞ Aᵀ − A P∞ ∂Aᵀ`.
pub fn model_sensitivities(
    params: &HyperParams,
    dt: f64,
) -> Result<(DiscreteModel, Vec<ModelSensitivity>)> {
    let (sde, ders) = params.spec.sde_with_derivatives()?;
    let model = discretize(&sde, dt)?;
    let m = model.dim();
    let a = &model.a;
    let pinf = &sde.pinf;
    let mut out = Vec::with_capacity(ders.len() + 1);
    for d in &ders {
        let (_, da) = expm_with_derivative(&sde.f, &d.df, dt);
        let ap = a * pinf;
        let mut dq = &d.dpinf
            - &da * pinf * a.transpose()
            - a * &d.dpinf * a.transpose()
            - ap * da.transpose();
        symmetrize(&mut dq);
        out.push(ModelSensitivity {
            da,
            dq,
            dnoise: 0.0,
        });
    }
    out.push(ModelSensitivity {
        da: Mat::zeros(m, m),
        dq: Mat::zeros(m, m),
        dnoise: params.noise_var(),
    });
    Ok((model, out))
}

/// `∂P̂ᵖ` solving `∂P = (A − B hᵀ) ∂P (A − B hᵀ)ᵀ + C` with
/// `B = A Pp h / (hᵀ Pp h + γ)`.
pub fn solve_derivative_dare(
    model: &DiscreteModel,
    sens: &ModelSensitivity,
    pp: &Mat,
    gamma: f64,
) -> Result<Mat> {
    let a = &model.a;
    let h = &model.h;
    let pph = pp * h;
    let s = h.dot(&pph) + gamma;
    let b = a * &pph / s;
    let da = &sens.da;
    let da_pp = da * pp;
    let half = &da_pp * a.transpose();
    let mut c = &half + half.transpose();
    let da_pph = da * &pph;
    let cross = &da_pph * b.transpose();
    c -= &cross;
    c -= cross.transpose();
    c += &b * b.transpose() * sens.dnoise;
    c += &sens.dq;
    symmetrize(&mut c);
    let closed = a - &b * h.transpose();
    let mut dp = solve_discrete_lyapunov(&closed, &c)?;
    symmetrize(&mut dp);
    Ok(dp)
}

/// Steady-state NLL and its gradient over `y`, accumulating only steps with
/// index `≥ start` (earlier steps only warm up the filter state).
pub fn nll_gradient_from(
    model: &DiscreteModel,
    sens: &[ModelSensitivity],
    y: &[f64],
    noise_var: f64,
    start: usize,
) -> Result<(f64, Vec<f64>)> {
    let m = model.dim();
    let h = &model.h;
    let pp = solve_pp_dare(model, noise_var)?;
    let pph = &pp * h;
    let s = h.dot(&pph) + noise_var;
    let k = &pph / s;
    let dpps = derivative_dares(model, sens, &pp, noise_var)?;
    let np = sens.len();
    let mut ds = vec![0.0; np];
    let mut dk = Vec::with_capacity(np);
    for j in 0..np {
        let dph = &dpps[j] * h;
        ds[j] = h.dot(&dph) + sens[j].dnoise;
        dk.push((dph - &k * ds[j]) / s);
    }

    let mut mf = Vector::zeros(m);
    let mut mp = Vector::zeros(m);
    let mut dmf: Vec<Vector> = (0..np).map(|_| Vector::zeros(m)).collect();
    let mut dmp = Vector::zeros(m);
    let mut dv_sum = vec![0.0; np];
    let mut sq = 0.0;
    let mut observed = 0usize;
    for (i, &yi) in y.iter().enumerate() {
        if i > 0 {
            mp.gemv(1.0, &model.a, &mf, 0.0);
        }
        let v = if yi.is_nan() { 0.0 } else { yi - h.dot(&mp) };
        let count = !yi.is_nan() && i >= start;
        for j in 0..np {
            if i > 0 {
                // ∂mᵖ = ∂A mᶠ + A ∂mᶠ
                dmp.gemv(1.0, &sens[j].da, &mf, 0.0);
                dmp.gemv(1.0, &model.a, &dmf[j], 1.0);
            } else {
                dmp.fill(0.0);
            }
            if yi.is_nan() {
                dmf[j].copy_from(&dmp);
                continue;
            }
            let dv = -h.dot(&dmp);
            dmf[j].copy_from(&dmp);
            dmf[j].axpy(v, &dk[j], 1.0);
            dmf[j].axpy(dv, &k, 1.0);
            if count {
                dv_sum[j] += v * dv;
            }
        }
        mf.copy_from(&mp);
        if !yi.is_nan() {
            mf.axpy(v, &k, 1.0);
        }
        if count {
            sq += v * v;
            observed += 1;
        }
    }
    let nobs = observed as f64;
    let nll = 0.5 * nobs * (LN_2PI + s.ln()) + sq / (2.0 * s);
    let grad = (0..np)
        .map(|j| 0.5 * nobs * ds[j] / s + dv_sum[j] / s - sq * ds[j] / (2.0 * s * s))
        .collect();
    if !nll.is_finite() {
        return Err(Error::Degenerate {
            step: y.len(),
            value: nll,
        });
    }
    Ok((nll, grad))
}

/// Steady-state NLL and gradient over the whole series.
pub fn nll_gradient(
    model: &DiscreteModel,
    sens: &[ModelSensitivity],
    y: &[f64],
    noise_var: f64,
) -> Result<(f64, Vec<f64>)> {
    nll_gradient_from(model, sens, y, noise_var, 0)
}

/// Steady-state NLL without gradient.
pub fn steady_nll(model: &DiscreteModel, y: &[f64], noise_var: f64) -> Result<f64> {
    let pp = solve_pp_dare(model, noise_var)?;
    let out = crate::ihgp::steady_gaussian_filter(model, &pp, noise_var, y)?;
    Ok(-out.log_lik)
}

/// Objective for hyperparameter learning: NLL and gradient in log space.
pub fn objective(params: &HyperParams, dt: f64, y: &[f64]) -> Result<(f64, Vec<f64>)> {
    let (model, sens) = model_sensitivities(params, dt)?;
    nll_gradient(&model, &sens, y, params.noise_var())
}

#[cfg(feature = "parallel")]
fn derivative_dares(
    model: &DiscreteModel,
    sens: &[ModelSensitivity],
    pp: &Mat,
    gamma: f64,
) -> Result<Vec<Mat>> {
    use rayon::prelude::*;
    sens.par_iter()
        .map(|s| solve_derivative_dare(model, s, pp, gamma))
        .collect()
}

#[cfg(not(feature = "parallel"))]
fn derivative_dares(
    model: &DiscreteModel,
    sens: &[ModelSensitivity],
    pp: &Mat,
    gamma: f64,
) -> Result<Vec<Mat>> {
    sens.iter()
        .map(|s| solve_derivative_dare(model, s, pp, gamma))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ssm::MaternOrder;
    use approx::assert_relative_eq;

    fn series(n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| {
                let x = i as f64 * 0.05;
                x.sin() + 0.3 * (3.1 * x).cos() + 0.05 * (((i * 7919) % 31) as f64 / 31.0 - 0.5)
            })
            .collect()
    }

    #[test]
    fn ou_transition_derivative() {
        let spec = KernelSpec::Matern {
            order: MaternOrder::Half,
            sigma2: 1.0,
            ell: 2.0,
        };
        let p = HyperParams::new(spec, 0.1).unwrap();
        let (_, sens) = model_sensitivities(&p, 0.5).unwrap();
        let want = (-0.25f64).exp() * 0.25;
        assert_relative_eq!(sens[1].da[(0, 0)], want, max_relative = 1e-12);
        assert_eq!(sens[0].da[(0, 0)], 0.0);
    }

    #[test]
    fn sensitivities_match_finite_differences() {
        let spec = KernelSpec::Sum(vec![
            KernelSpec::matern(2.5, 0.8, 0.6).unwrap(),
            KernelSpec::Product(vec![
                KernelSpec::Periodic { sigma2: 1.0, ell: 1.1, period: 1.0, harmonics: 2 },
                KernelSpec::matern(1.5, 1.2, 3.0).unwrap(),
            ]),
        ]);
        let p = HyperParams::new(spec, 0.2).unwrap();
        let dt = 0.07;
        let (_, sens) = model_sensitivities(&p, dt).unwrap();
        let step = 1e-6;
        for j in 0..p.len() {
            let mut up = p.theta().to_vec();
            let mut dn = up.clone();
            up[j] += step;
            dn[j] -= step;
            let mu = discretize(&p.with_theta(&up).unwrap().spec().to_sde().unwrap(), dt).unwrap();
            let md = discretize(&p.with_theta(&dn).unwrap().spec().to_sde().unwrap(), dt).unwrap();
            let fa = (&mu.a - &md.a) / (2.0 * step);
            let fq = (&mu.q - &md.q) / (2.0 * step);
            assert!((&fa - &sens[j].da).norm() <= 1e-5 * (1.0 + fa.norm()), "dA {j}");
            assert!((&fq - &sens[j].dq).norm() <= 1e-5 * (1.0 + fq.norm()), "dQ {j}");
        }
    }

    #[test]
    fn zero_sensitivity_gives_zero() {
        let spec = KernelSpec::matern(1.5, 1.0, 1.0).unwrap();
        let p = HyperParams::new(spec, 0.1).unwrap();
        let (model, _) = model_sensitivities(&p, 0.1).unwrap();
        let pp = solve_pp_dare(&model, 0.1).unwrap();
        let zero = ModelSensitivity {
            da: Mat::zeros(2, 2),
            dq: Mat::zeros(2, 2),
            dnoise: 0.0,
        };
        assert_eq!(solve_derivative_dare(&model, &zero, &pp, 0.1).unwrap().norm(), 0.0);
    }

    #[test]
    fn scalar_derivative_dare() {
        // p² + (γ(1 − a²) − q) p − qγ = 0; differentiate in q at fixed a, γ.
        let (a, q, g) = (0.7, 0.5, 0.3);
        let model = DiscreteModel::new(
            Mat::from_element(1, 1, a),
            Mat::from_element(1, 1, q),
            Vector::from_element(1, 1.0),
            Mat::from_element(1, 1, q / (1.0 - a * a)),
            1.0,
        )
        .unwrap();
        let pp = solve_pp_dare(&model, g).unwrap();
        let p = pp[(0, 0)];
        let b = g * (1.0 - a * a) - q;
        // ∂/∂q: (2p + b) dp − p − γ = 0
        let want = (p + g) / (2.0 * p + b);
        let sens = ModelSensitivity {
            da: Mat::zeros(1, 1),
            dq: Mat::from_element(1, 1, 1.0),
            dnoise: 0.0,
        };
        let dp = solve_derivative_dare(&model, &sens, &pp, g).unwrap();
        assert_relative_eq!(dp[(0, 0)], want, max_relative = 1e-10);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let spec = KernelSpec::matern(1.5, 0.9, 0.7).unwrap();
        let p = HyperParams::new(spec, 0.1).unwrap();
        let y = series(600);
        let (nll, grad) = objective(&p, 0.05, &y).unwrap();
        let (model, _) = model_sensitivities(&p, 0.05).unwrap();
        assert_relative_eq!(nll, steady_nll(&model, &y, 0.1).unwrap(), max_relative = 1e-12);
        let h = 1e-5;
        for j in 0..p.len() {
            let mut up = p.theta().to_vec();
            let mut dn = up.clone();
            up[j] += h;
            dn[j] -= h;
            let fu = objective(&p.with_theta(&up).unwrap(), 0.05, &y).unwrap().0;
            let fd = objective(&p.with_theta(&dn).unwrap(), 0.05, &y).unwrap().0;
            let fdg = (fu - fd) / (2.0 * h);
            assert!((fdg - grad[j]).abs() <= 1e-5 * fdg.abs().max(1.0), "param {j}: {fdg} vs {}", grad[j]);
        }
    }

    #[test]
    fn tied_components_have_equal_gradients() {
        let c = KernelSpec::matern(1.5, 0.5, 0.7).unwrap();
        let p = HyperParams::new(KernelSpec::Sum(vec![c.clone(), c]), 0.1).unwrap();
        let (_, g) = objective(&p, 0.05, &series(300)).unwrap();
        assert_relative_eq!(g[0], g[2], max_relative = 1e-8);
        assert_relative_eq!(g[1], g[3], max_relative = 1e-8);
    }

    #[test]
    fn hyperparams_round_trip() {
        let p = HyperParams::new(KernelSpec::matern(0.5, 2.0, 3.0).unwrap(), 0.25).unwrap();
        assert_eq!(p.names(), vec!["k0:matern12.sigma2", "k0:matern12.ell", "noise_var"]);
        let nat = p.natural();
        assert_relative_eq!(nat[0], 2.0, max_relative = 1e-15);
        assert_relative_eq!(nat[2], 0.25, max_relative = 1e-15);
        assert!(p.with_theta(&[0.0, f64::NAN, 0.0]).is_err());
        assert!(HyperParams::new(KernelSpec::matern(0.5, 1.0, 1.0).unwrap(), -1.0).is_err());
    }
}
