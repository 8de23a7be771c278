//! Exact state-space inference: Kalman filter, RTS smoother and assumed
//! density filtering (single-sweep EP) for non-Gaussian likelihoods.
//!
//! Cost is `O(m³)` per step. Missing observations are encoded as `NaN`.

use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::lik::{LikelihoodModel, SitePair};
use crate::linalg::symmetrize;
use crate::special::LN_2PI;
use crate::ssm::DiscreteModel;
use crate::{Error, Mat, Result, Vector};

/// Gaussian belief over the state.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    pub mean: Vector,
    pub cov: Mat,
}

/// Per-step latent marginals `N(μᵢ, σ²ᵢ)` and the log marginal likelihood.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PosteriorMarginals {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    pub log_lik: f64,
}

impl PosteriorMarginals {
    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }
}

/// Measurement noise variance, constant or per step.
#[derive(Debug, Clone, PartialEq)]
pub enum NoiseVariance {
    Constant(f64),
    PerStep(Vec<f64>),
}

impl NoiseVariance {
    fn at(&self, i: usize) -> f64 {
        match self {
            NoiseVariance::Constant(v) => *v,
            NoiseVariance::PerStep(v) => v[i],
        }
    }
}

/// Forward-pass output.
///
/// Stores the predictive states, the filtered means, and per step the gain
/// `kᵢ` and innovation variance `sᵢ`; filtered covariances are recovered as
/// `Pᵖᵢ − sᵢ kᵢ kᵢᵀ`, which halves the memory of storing both.
#[derive(Debug, Clone)]
pub struct FilterOutput {
    pub pred_means: Vec<Vector>,
    pub pred_covs: Vec<Mat>,
    pub filt_means: Vec<Vector>,
    pub gains: Vec<Vector>,
    /// Innovation variance, `∞` for skipped updates.
    pub innov_vars: Vec<f64>,
    /// Sites used in the updates (Gaussian sites for `kalman_filter`).
    pub sites: Vec<SitePair>,
    pub log_lik: f64,
}

impl FilterOutput {
    pub fn len(&self) -> usize {
        self.filt_means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.filt_means.is_empty()
    }

    pub fn predicted(&self, i: usize) -> GaussianState {
        GaussianState {
            mean: self.pred_means[i].clone(),
            cov: self.pred_covs[i].clone(),
        }
    }

    pub fn filtered_cov(&self, i: usize) -> Mat {
        let s = self.innov_vars[i];
        if s.is_infinite() {
            return self.pred_covs[i].clone();
        }
        let k = &self.gains[i];
        let mut p = &self.pred_covs[i] - k * k.transpose() * s;
        symmetrize(&mut p);
        p
    }

    pub fn filtered(&self, i: usize) -> GaussianState {
        GaussianState {
            mean: self.filt_means[i].clone(),
            cov: self.filtered_cov(i),
        }
    }

    /// Number of sites replaced by `γ = ∞` during moment matching.
    pub fn clamped_sites(&self) -> usize {
        self.sites.iter().filter(|s| s.clamped).count()
    }
}

fn check_model(model: &DiscreteModel) -> Result<()> {
    let m = model.dim();
    if model.q.shape() != (m, m) || model.h.len() != m || model.p0.shape() != (m, m) {
        return Err(Error::Dimension(format!(
            "A {:?}, Q {:?}, h {}, P0 {:?}",
            model.a.shape(),
            model.q.shape(),
            model.h.len(),
            model.p0.shape()
        )));
    }
    Ok(())
}

/// Shared forward recursion; `site` maps `(i, y, μ̃, σ̃²)` to a Gaussian site.
fn forward(
    model: &DiscreteModel,
    y: &[f64],
    mut site: impl FnMut(usize, f64, f64, f64) -> Result<SitePair>,
) -> Result<FilterOutput> {
    check_model(model)?;
    let m = model.dim();
    let n = y.len();
    let h = &model.h;
    let at = model.a.transpose();
    let mut out = FilterOutput {
        pred_means: Vec::with_capacity(n),
        pred_covs: Vec::with_capacity(n),
        filt_means: Vec::with_capacity(n),
        gains: Vec::with_capacity(n),
        innov_vars: Vec::with_capacity(n),
        sites: Vec::with_capacity(n),
        log_lik: 0.0,
    };
    let mut mf = Vector::zeros(m);
    let mut pf = model.p0.clone();
    let mut tmp = Mat::zeros(m, m);
    for (i, &yi) in y.iter().enumerate() {
        let (mp, pp) = if i == 0 {
            (Vector::zeros(m), model.p0.clone())
        } else {
            let mp = &model.a * &mf;
            tmp.gemm(1.0, &model.a, &pf, 0.0);
            let mut pp = model.q.clone();
            pp.gemm(1.0, &tmp, &at, 1.0);
            symmetrize(&mut pp);
            (mp, pp)
        };
        let ph = &pp * h;
        let mu = h.dot(&mp);
        let s2 = h.dot(&ph);
        let st = if yi.is_nan() {
            SitePair::missing()
        } else {
            site(i, yi, mu, s2)?
        };
        if st.gamma.is_infinite() {
            mf = mp.clone();
            pf = pp.clone();
            out.gains.push(Vector::zeros(m));
            out.innov_vars.push(f64::INFINITY);
        } else {
            let s = s2 + st.gamma;
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::Degenerate { step: i, value: s });
            }
            let k = &ph / s;
            mf = &mp + &k * (st.eta - mu);
            pf = &pp - &k * ph.transpose();
            symmetrize(&mut pf);
            out.gains.push(k);
            out.innov_vars.push(s);
            out.log_lik += st.log_z;
        }
        out.sites.push(st);
        out.pred_means.push(mp);
        out.pred_covs.push(pp);
        out.filt_means.push(mf.clone());
    }
    Ok(out)
}

/// Kalman filter with Gaussian measurement noise.
///
/// `log_lik = −Σ ½ (log 2π sᵢ + vᵢ² / sᵢ)` over observed steps.
pub fn kalman_filter(model: &DiscreteModel, y: &[f64], noise: &NoiseVariance) -> Result<FilterOutput> {
    if let NoiseVariance::PerStep(v) = noise {
        if v.len() != y.len() {
            return Err(Error::Dimension(format!(
                "{} noise variances for {} observations",
                v.len(),
                y.len()
            )));
        }
    }
    forward(model, y, |i, yi, mu, s2| {
        let r = noise.at(i);
        if !(r > 0.0) {
            return Err(Error::ParameterDomain(format!(
                "noise variance must be positive, got {r} at step {i}"
            )));
        }
        let s = s2 + r;
        let v = yi - mu;
        Ok(SitePair {
            eta: yi,
            gamma: r,
            log_z: -0.5 * (LN_2PI + s.ln() + v * v / s),
            clamped: false,
        })
    })
}

/// Assumed density filtering: each observation is moment matched against its
/// cavity and the resulting Gaussian site is applied as a Kalman update.
/// `log_lik` accumulates the tilted normalizers `log Zᵢ`.
pub fn adf_filter(model: &DiscreteModel, y: &[f64], lik: &LikelihoodModel) -> Result<FilterOutput> {
    forward(model, y, |i, yi, mu, s2| {
        if !(s2 > 0.0) {
            return Err(Error::Degenerate { step: i, value: s2 });
        }
        lik.moment_match(yi, mu, s2)
    })
}

/// Smoother gain `Gᵢ = Pᶠᵢ Aᵀ [Pᵖᵢ₊₁]⁻¹` via a Cholesky solve.
fn smoother_gain(a: &Mat, pf: &Mat, pp_next: &Mat) -> Result<Mat> {
    let chol = pp_next
        .clone()
        .cholesky()
        .ok_or(Error::Conditioning("predictive covariance is not positive definite"))?;
    Ok(chol.solve(&(a * pf)).transpose())
}

fn backward(
    model: &DiscreteModel,
    filt: &FilterOutput,
    mut visit: impl FnMut(usize, &Vector, &Mat),
) -> Result<()> {
    let n = filt.len();
    if n == 0 {
        return Ok(());
    }
    let mut ms = filt.filt_means[n - 1].clone();
    let mut ps = filt.filtered_cov(n - 1);
    visit(n - 1, &ms, &ps);
    for i in (0..n - 1).rev() {
        let pf = filt.filtered_cov(i);
        let pp_next = &filt.pred_covs[i + 1];
        let g = smoother_gain(&model.a, &pf, pp_next)?;
        let dm = &ms - &filt.pred_means[i + 1];
        ms = &filt.filt_means[i] + &g * dm;
        let dp = &ps - pp_next;
        let mut next = pf + &g * dp * g.transpose();
        symmetrize(&mut next);
        ps = next;
        visit(i, &ms, &ps);
    }
    Ok(())
}

/// RTS smoother returning the latent marginals and the smoothed states.
pub fn rts_smoother(
    model: &DiscreteModel,
    filt: &FilterOutput,
) -> Result<(PosteriorMarginals, Vec<GaussianState>)> {
    let n = filt.len();
    let mut states: Vec<Option<GaussianState>> = (0..n).map(|_| None).collect();
    backward(model, filt, |i, m, p| {
        states[i] = Some(GaussianState {
            mean: m.clone(),
            cov: p.clone(),
        })
    })?;
    let states: Vec<GaussianState> = states.into_iter().map(|s| s.expect("visited")).collect();
    let h = &model.h;
    let marg = PosteriorMarginals {
        mean: states.iter().map(|s| h.dot(&s.mean)).collect(),
        var: states
            .iter()
            .map(|s| crate::linalg::quad_form(&s.cov, h).max(0.0))
            .collect(),
        log_lik: filt.log_lik,
    };
    Ok((marg, states))
}

/// RTS smoother keeping only the latent marginals.
pub fn rts_marginals(model: &DiscreteModel, filt: &FilterOutput) -> Result<PosteriorMarginals> {
    let n = filt.len();
    let mut mean = alloc::vec![0.0; n];
    let mut var = alloc::vec![0.0; n];
    let h = &model.h;
    backward(model, filt, |i, m, p| {
        mean[i] = h.dot(m);
        var[i] = crate::linalg::quad_form(p, h).max(0.0);
    })?;
    Ok(PosteriorMarginals {
        mean,
        var,
        log_lik: filt.log_lik,
    })
}

/// Filter and smooth with Gaussian noise in one call.
pub fn gaussian_posterior(model: &DiscreteModel, y: &[f64], noise_var: f64) -> Result<PosteriorMarginals> {
    let filt = kalman_filter(model, y, &NoiseVariance::Constant(noise_var))?;
    rts_marginals(model, &filt)
}
