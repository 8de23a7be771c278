//! Continuous-time state-space representations of stationary GP priors and
//! their discretization.
//!
//! A prior `f(t) ~ GP(0, κ)` is represented as the LTI SDE
//! `ḟ(t) = F f(t) + L w(t)`, `f(t) = hᵀ f(t)`, with white noise of spectral
//! density `Qc` and stationary covariance `P∞` solving
//! `F P∞ + P∞ Fᵀ + L Qc Lᵀ = 0`.

mod kernel;

pub use kernel::{KernelSpec, SdeDerivative};

use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::expm::expm;
use crate::linalg::{
    block_diag, concat, kron, kron_sum, kron_vec, solve_continuous_lyapunov, symmetrize,
};
use crate::special::scaled_bessel_i;
use crate::{Error, Mat, Result, Vector};

/// Smoothness of a half-integer Matérn kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaternOrder {
    /// ν = 1/2 (Ornstein–Uhlenbeck), state dimension 1.
    Half,
    /// ν = 3/2, state dimension 2.
    ThreeHalves,
    /// ν = 5/2, state dimension 3.
    FiveHalves,
}

impl MaternOrder {
    pub fn from_nu(nu: f64) -> Result<Self> {
        if nu == 0.5 {
            Ok(MaternOrder::Half)
        } else if nu == 1.5 {
            Ok(MaternOrder::ThreeHalves)
        } else if nu == 2.5 {
            Ok(MaternOrder::FiveHalves)
        } else {
            Err(Error::ParameterDomain(format!(
                "Matérn smoothness must be 0.5, 1.5 or 2.5, got {nu}"
            )))
        }
    }

    pub fn nu(self) -> f64 {
        match self {
            MaternOrder::Half => 0.5,
            MaternOrder::ThreeHalves => 1.5,
            MaternOrder::FiveHalves => 2.5,
        }
    }

    /// State dimension `ν + 1/2`.
    pub fn state_dim(self) -> usize {
        match self {
            MaternOrder::Half => 1,
            MaternOrder::ThreeHalves => 2,
            MaternOrder::FiveHalves => 3,
        }
    }

    /// `λ = √(2ν) / ℓ`.
    pub fn rate(self, ell: f64) -> f64 {
        (2.0 * self.nu()).sqrt() / ell
    }
}

/// Continuous-time linear time-invariant SDE model of a GP prior.
#[derive(Debug, Clone, PartialEq)]
pub struct LtiSde {
    /// Feedback matrix `F` (m×m).
    pub f: Mat,
    /// Noise effect matrix `L` (m×s).
    pub l: Mat,
    /// White-noise spectral density `Qc` (s×s).
    pub qc: Mat,
    /// Measurement vector `h`.
    pub h: Vector,
    /// Stationary state covariance `P∞`.
    pub pinf: Mat,
}

impl LtiSde {
    pub fn dim(&self) -> usize {
        self.f.nrows()
    }

    /// `L Qc Lᵀ`.
    pub fn diffusion(&self) -> Mat {
        &self.l * &self.qc * self.l.transpose()
    }

    /// Covariance reconstructed from the state space,
    /// `κ(τ) = hᵀ exp(F|τ|) P∞ h`.
    pub fn covariance(&self, tau: f64) -> f64 {
        let a = expm(&(&self.f * tau.abs()));
        let v = &a * (&self.pinf * &self.h);
        self.h.dot(&v)
    }

    /// `hᵀ P∞ h`, the prior marginal variance.
    pub fn marginal_variance(&self) -> f64 {
        crate::linalg::quad_form(&self.pinf, &self.h)
    }

    /// `‖F P∞ + P∞ Fᵀ + L Qc Lᵀ‖_F`.
    pub fn lyapunov_residual(&self) -> f64 {
        let r = &self.f * &self.pinf + &self.pinf * self.f.transpose() + self.diffusion();
        r.norm()
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::ParameterDomain(format!(
            "{name} must be positive and finite, got {v}"
        )))
    }
}

/// Feedback matrix and stationary covariance of a Matérn SDE for rate `λ`.
pub(crate) fn matern_blocks(order: MaternOrder, sigma2: f64, lambda: f64) -> (Mat, Mat) {
    match order {
        MaternOrder::Half => (
            Mat::from_element(1, 1, -lambda),
            Mat::from_element(1, 1, sigma2),
        ),
        MaternOrder::ThreeHalves => {
            let l2 = lambda * lambda;
            (
                Mat::from_row_slice(2, 2, &[0.0, 1.0, -l2, -2.0 * lambda]),
                Mat::from_row_slice(2, 2, &[sigma2, 0.0, 0.0, l2 * sigma2]),
            )
        }
        MaternOrder::FiveHalves => {
            let l2 = lambda * lambda;
            let l3 = l2 * lambda;
            let kappa = l2 * sigma2 / 3.0;
            (
                Mat::from_row_slice(
                    3,
                    3,
                    &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0, -l3, -3.0 * l2, -3.0 * lambda],
                ),
                Mat::from_row_slice(
                    3,
                    3,
                    &[sigma2, 0.0, -kappa, 0.0, kappa, 0.0, -kappa, 0.0, l2 * l2 * sigma2],
                ),
            )
        }
    }
}

/// State-space form of the Matérn kernel with smoothness `order`, magnitude
/// `sigma2` and length-scale `ell`.
pub fn build_matern(order: MaternOrder, sigma2: f64, ell: f64) -> Result<LtiSde> {
    check_positive("Matérn magnitude", sigma2)?;
    check_positive("Matérn length-scale", ell)?;
    let lambda = order.rate(ell);
    let m = order.state_dim();
    let (f, pinf) = matern_blocks(order, sigma2, lambda);
    let qc = match order {
        MaternOrder::Half => 2.0 * lambda * sigma2,
        MaternOrder::ThreeHalves => 4.0 * lambda.powi(3) * sigma2,
        MaternOrder::FiveHalves => 16.0 / 3.0 * lambda.powi(5) * sigma2,
    };
    let mut l = Mat::zeros(m, 1);
    l[(m - 1, 0)] = 1.0;
    let mut h = Vector::zeros(m);
    h[0] = 1.0;
    Ok(LtiSde {
        f,
        l,
        qc: Mat::from_element(1, 1, qc),
        h,
        pinf,
    })
}

/// Normalized harmonic weights `q_j²`, `j = 0..=harmonics`, of the periodic
/// kernel `exp(−2 sin²(πτ/p) / ℓ²)`, together with their derivatives with
/// respect to `log ℓ`.
pub(crate) fn periodic_weights(ell: f64, harmonics: usize) -> (Vec<f64>, Vec<f64>) {
    let x = 1.0 / (ell * ell);
    let scaled = scaled_bessel_i(harmonics + 1, x);
    // w_0 = e^{-x} I_0, w_j = 2 e^{-x} I_j
    let w: Vec<f64> = (0..=harmonics)
        .map(|j| if j == 0 { scaled[0] } else { 2.0 * scaled[j] })
        .collect();
    // d/dx e^{-x} I_j = e^{-x} (I_j' − I_j), I_j' = (I_{j−1} + I_{j+1}) / 2, I_0' = I_1
    let dw: Vec<f64> = (0..=harmonics)
        .map(|j| {
            if j == 0 {
                scaled[1] - scaled[0]
            } else {
                2.0 * (0.5 * (scaled[j - 1] + scaled[j + 1]) - scaled[j])
            }
        })
        .collect();
    let total: f64 = w.iter().sum();
    let dtotal: f64 = dw.iter().sum();
    let dx_dlog_ell = -2.0 * x;
    let q: Vec<f64> = w.iter().map(|v| v / total).collect();
    let dq: Vec<f64> = w
        .iter()
        .zip(&dw)
        .map(|(v, dv)| (dv * total - v * dtotal) / (total * total) * dx_dlog_ell)
        .collect();
    (q, dq)
}

/// State-space form of the periodic kernel
/// `σ² exp(−2 sin²(π τ / period) / ℓ²)`, truncated to `harmonics` oscillators
/// on top of the constant term (state dimension `2·(harmonics + 1)`).
///
/// Harmonic variances are renormalized to sum to `σ²` exactly.
pub fn build_periodic(sigma2: f64, ell: f64, period: f64, harmonics: usize) -> Result<LtiSde> {
    check_positive("periodic magnitude", sigma2)?;
    check_positive("periodic length-scale", ell)?;
    check_positive("period", period)?;
    if harmonics < 1 {
        return Err(Error::ParameterDomain(
            "periodic kernel needs at least one harmonic".into(),
        ));
    }
    let (q, _) = periodic_weights(ell, harmonics);
    let omega = 2.0 * core::f64::consts::PI / period;
    let m = 2 * (harmonics + 1);
    let mut f = Mat::zeros(m, m);
    let mut pinf = Mat::zeros(m, m);
    let mut h = Vector::zeros(m);
    for (j, qj) in q.iter().enumerate() {
        let w = omega * j as f64;
        let o = 2 * j;
        f[(o, o + 1)] = -w;
        f[(o + 1, o)] = w;
        pinf[(o, o)] = sigma2 * qj;
        pinf[(o + 1, o + 1)] = sigma2 * qj;
        h[o] = 1.0;
    }
    Ok(LtiSde {
        f,
        l: Mat::identity(m, m),
        qc: Mat::zeros(m, m),
        h,
        pinf,
    })
}

/// Sum of independent processes: block-diagonal concatenation of the states.
pub fn combine_sum(a: &LtiSde, b: &LtiSde) -> LtiSde {
    LtiSde {
        f: block_diag(&a.f, &b.f),
        l: block_diag(&a.l, &b.l),
        qc: block_diag(&a.qc, &b.qc),
        h: concat(&a.h, &b.h),
        pinf: block_diag(&a.pinf, &b.pinf),
    }
}

/// Product kernel `κ_a κ_b`: Kronecker-sum feedback, Kronecker-product
/// stationary covariance and measurement.
///
/// The diffusion is set to `−(F P∞ + P∞ Fᵀ)` so the Lyapunov identity holds
/// exactly; it is stored with `L = I`.
pub fn combine_product(a: &LtiSde, b: &LtiSde) -> LtiSde {
    let f = kron_sum(&a.f, &b.f);
    let pinf = kron(&a.pinf, &b.pinf);
    let mut diffusion = -(&f * &pinf + &pinf * f.transpose());
    symmetrize(&mut diffusion);
    let m = f.nrows();
    LtiSde {
        f,
        l: Mat::identity(m, m),
        qc: diffusion,
        h: kron_vec(&a.h, &b.h),
        pinf,
    }
}

/// Stationary covariance `P` solving `F P + P Fᵀ + L Qc Lᵀ = 0`.
pub fn stationary_covariance(f: &Mat, l: &Mat, qc: &Mat) -> Result<Mat> {
    let w = l * qc * l.transpose();
    solve_continuous_lyapunov(f, &w)
}

/// Discrete-time model `f_k = A f_{k−1} + q_k`, `q_k ~ N(0, Q)` on an
/// equidistant grid with spacing `dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteModel {
    pub a: Mat,
    pub q: Mat,
    pub h: Vector,
    /// Initial state covariance (the stationary covariance for stationary priors).
    pub p0: Mat,
    pub dt: f64,
}

impl DiscreteModel {
    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    /// Build directly from matrices; checks shapes only.
    pub fn new(a: Mat, q: Mat, h: Vector, p0: Mat, dt: f64) -> Result<Self> {
        let m = a.nrows();
        if a.ncols() != m || q.shape() != (m, m) || h.len() != m || p0.shape() != (m, m) {
            return Err(Error::Dimension(format!(
                "A {:?}, Q {:?}, h {}, P0 {:?}",
                a.shape(),
                q.shape(),
                h.len(),
                p0.shape()
            )));
        }
        Ok(DiscreteModel { a, q, h, p0, dt })
    }
}

/// `A = exp(F dt)`, `Q = P∞ − A P∞ Aᵀ`, `P0 = P∞`.
pub fn discretize(model: &LtiSde, dt: f64) -> Result<DiscreteModel> {
    check_positive("time step", dt)?;
    let a = expm(&(&model.f * dt));
    let mut q = &model.pinf - &a * &model.pinf * a.transpose();
    symmetrize(&mut q);
    Ok(DiscreteModel {
        a,
        q,
        h: model.h.clone(),
        p0: model.pinf.clone(),
        dt,
    })
}
