//! Infinite-horizon GP inference: forward and backward passes in which every
//! step uses steady-state covariances looked up by its likelihood variance,
//! so the per-step cost is `O(m²)`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::exact::PosteriorMarginals;
use crate::lik::LikelihoodModel;
use crate::linalg::quad_form;
use crate::special::LN_2PI;
use crate::ssm::DiscreteModel;
use crate::steady::{steady_state, GammaGrid, SteadyStateSet};
use crate::{Error, Result, Vector};

/// Counters and checks collected during an IHGP run.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct IhgpDiagnostics {
    /// Sites whose matched precision was non-positive and were skipped.
    pub clamped_sites: usize,
    /// Missing observations.
    pub missing: usize,
    /// Likelihood variances below the tabulated range (clamped lookups).
    pub below_grid: usize,
    /// Likelihood variances above the tabulated range (clamped lookups).
    pub above_grid: usize,
    /// Largest `(hᵀk)² σ̃²`: the latent-variance gap between the filter
    /// covariance forms `Pᵖ − kγkᵀ` and `Pᵖ − k hᵀ Pᵖ`.
    pub max_filter_form_gap: f64,
}

/// Output of [`ihgp_infer`].
#[derive(Debug, Clone, PartialEq)]
pub struct IhgpResult {
    pub marginals: PosteriorMarginals,
    /// Per-step likelihood variance `γᵢ` (`∞` for missing or skipped sites).
    pub gammas: Vec<f64>,
    /// Per-step pseudo-observation `ηᵢ`.
    pub etas: Vec<f64>,
    /// Per-step filtered latent mean `hᵀ mᶠᵢ`.
    pub filter_mean: Vec<f64>,
    /// Per-step filtered latent variance `hᵀ Pᶠᵢ h` with `Pᶠᵢ = Pᵖᵢ − kᵢγᵢkᵢᵀ`.
    pub filter_var: Vec<f64>,
    pub diagnostics: IhgpDiagnostics,
}

/// Source of steady-state quantities indexed by likelihood variance.
trait SteadySource {
    /// Writes `Pp(γ) h` into `pph` and returns `hᵀ Pp(γ) h`.
    fn predictive(&self, gamma: f64, pph: &mut Vector) -> f64;
    /// `out ← G(γ) v`.
    fn smoother_gain(&self, gamma: f64, v: &Vector, out: &mut Vector);
    /// `hᵀ Ps(γ) h`.
    fn smoothed_variance(&self, gamma: f64) -> f64;
}

impl SteadySource for GammaGrid {
    fn predictive(&self, gamma: f64, pph: &mut Vector) -> f64 {
        GammaGrid::predictive(self, gamma, pph)
    }

    fn smoother_gain(&self, gamma: f64, v: &Vector, out: &mut Vector) {
        self.apply_smoother_gain(gamma, v, out)
    }

    fn smoothed_variance(&self, gamma: f64) -> f64 {
        GammaGrid::smoothed_variance(self, gamma)
    }
}

/// Two exactly solved sets: one noise level and the no-measurement limit.
struct PairSource {
    finite: SteadyStateSet,
    finite_pph: Vector,
    infinite: SteadyStateSet,
    infinite_pph: Vector,
    h: Vector,
}

impl PairSource {
    fn pick(&self, gamma: f64) -> (&SteadyStateSet, &Vector) {
        if gamma.is_infinite() {
            (&self.infinite, &self.infinite_pph)
        } else {
            (&self.finite, &self.finite_pph)
        }
    }
}

impl SteadySource for PairSource {
    fn predictive(&self, gamma: f64, pph: &mut Vector) -> f64 {
        let (_, v) = self.pick(gamma);
        pph.copy_from(v);
        self.h.dot(v)
    }

    fn smoother_gain(&self, gamma: f64, v: &Vector, out: &mut Vector) {
        out.gemv(1.0, &self.pick(gamma).0.g, v, 0.0);
    }

    fn smoothed_variance(&self, gamma: f64) -> f64 {
        quad_form(&self.pick(gamma).0.ps, &self.h)
    }
}

/// Per-step site: `(η, γ, log Z, clamped)`.
type Site = (f64, f64, f64, bool);

fn run(
    model: &DiscreteModel,
    source: &impl SteadySource,
    y: &[f64],
    mut site: impl FnMut(usize, f64, f64, f64) -> Result<Site>,
) -> Result<IhgpResult> {
    let n = y.len();
    if n == 0 {
        return Err(Error::Input("empty observation series".into()));
    }
    let m = model.dim();
    let h = &model.h;
    let mut diag = IhgpDiagnostics::default();
    let mut filt: Vec<Vector> = Vec::with_capacity(n);
    let mut gammas = Vec::with_capacity(n);
    let mut etas = Vec::with_capacity(n);
    let mut filter_mean = Vec::with_capacity(n);
    let mut filter_var = Vec::with_capacity(n);
    let mut log_lik = 0.0;

    let mut mf = Vector::zeros(m);
    let mut mp = Vector::zeros(m);
    let mut pph = Vector::zeros(m);
    let mut prev_gamma = f64::INFINITY;
    for (i, &yi) in y.iter().enumerate() {
        if i > 0 {
            mp.gemv(1.0, &model.a, &mf, 0.0);
        }
        let s2 = source.predictive(prev_gamma, &mut pph);
        let mu = h.dot(&mp);
        let (eta, gamma) = if yi.is_nan() {
            diag.missing += 1;
            (0.0, f64::INFINITY)
        } else {
            if !(s2 > 0.0) {
                return Err(Error::Degenerate { step: i, value: s2 });
            }
            let (eta, gamma, log_z, clamped) = site(i, yi, mu, s2)?;
            if clamped {
                diag.clamped_sites += 1;
            }
            if gamma.is_finite() {
                log_lik += log_z;
            }
            (eta, gamma)
        };
        mf.copy_from(&mp);
        let fvar = if gamma.is_finite() {
            let denom = s2 + gamma;
            let scale = (eta - mu) / denom;
            mf.axpy(scale, &pph, 1.0);
            let hk = s2 / denom;
            diag.max_filter_form_gap = diag.max_filter_form_gap.max(hk * hk * s2);
            // hᵀ (Pᵖ − k γ kᵀ) h
            s2 - gamma * hk * hk
        } else {
            s2
        };
        filter_mean.push(h.dot(&mf));
        filter_var.push(fvar.max(0.0));
        gammas.push(gamma);
        etas.push(eta);
        filt.push(mf.clone());
        prev_gamma = gamma;
    }

    let mut mean = vec![0.0; n];
    let mut var = vec![0.0; n];
    let mut ms = filt[n - 1].clone();
    mean[n - 1] = h.dot(&ms);
    var[n - 1] = source.smoothed_variance(gammas[n - 1]);
    let mut d = Vector::zeros(m);
    let mut corr = Vector::zeros(m);
    for i in (0..n - 1).rev() {
        // d = mˢᵢ₊₁ − A mᶠᵢ
        d.copy_from(&ms);
        d.gemv(-1.0, &model.a, &filt[i], 1.0);
        source.smoother_gain(gammas[i], &d, &mut corr);
        ms.copy_from(&filt[i]);
        ms += &corr;
        mean[i] = h.dot(&ms);
        var[i] = source.smoothed_variance(gammas[i]);
    }
    if !log_lik.is_finite() {
        return Err(Error::Degenerate {
            step: n - 1,
            value: log_lik,
        });
    }
    Ok(IhgpResult {
        marginals: PosteriorMarginals {
            mean,
            var,
            log_lik,
        },
        gammas,
        etas,
        filter_mean,
        filter_var,
        diagnostics: diag,
    })
}

fn check_grid(model: &DiscreteModel, grid: &GammaGrid) -> Result<()> {
    if grid.state_dim() != model.dim() || grid.measurement() != &model.h {
        return Err(Error::Dimension(format!(
            "grid built for state dimension {}, model has {}",
            grid.state_dim(),
            model.dim()
        )));
    }
    Ok(())
}

/// IHGP inference for any likelihood. Missing observations (`NaN`) use
/// `γ = ∞`; the first predictive covariance is `P0` (`γ₀ = ∞`).
///
/// `log_lik` accumulates the tilted normalizers of the moment-matching steps
/// (for the Gaussian likelihood, the innovation form of the evidence).
pub fn ihgp_infer(
    model: &DiscreteModel,
    grid: &GammaGrid,
    y: &[f64],
    lik: &LikelihoodModel,
) -> Result<IhgpResult> {
    check_grid(model, grid)?;
    let mut result = run(model, grid, y, |_, yi, mu, s2| {
        let s = lik.moment_match(yi, mu, s2)?;
        Ok((s.eta, s.gamma, s.log_z, s.clamped))
    })?;
    let hits = grid.range_hits(&result.gammas);
    result.diagnostics.below_grid = hits.below_range;
    result.diagnostics.above_grid = hits.above_range;
    Ok(result)
}

/// Gaussian-likelihood IHGP with constant noise: solves the steady state at
/// `σ²_n` and `∞` only (no grid), then runs the same passes as
/// [`ihgp_infer`].
pub fn ihgp_regression(model: &DiscreteModel, y: &[f64], noise_var: f64) -> Result<IhgpResult> {
    let finite = steady_state(model, noise_var)?;
    let infinite = steady_state(model, f64::INFINITY)?;
    ihgp_regression_with(model, y, finite, infinite)
}

/// [`ihgp_regression`] with precomputed steady-state sets.
pub fn ihgp_regression_with(
    model: &DiscreteModel,
    y: &[f64],
    finite: SteadyStateSet,
    infinite: SteadyStateSet,
) -> Result<IhgpResult> {
    let noise_var = finite.gamma;
    if !(noise_var > 0.0 && noise_var.is_finite()) || !infinite.gamma.is_infinite() {
        return Err(Error::ParameterDomain(format!(
            "expected a finite and an infinite steady-state set, got γ = {noise_var} and {}",
            infinite.gamma
        )));
    }
    let source = PairSource {
        finite_pph: &finite.pp * &model.h,
        infinite_pph: &infinite.pp * &model.h,
        finite,
        infinite,
        h: model.h.clone(),
    };
    run(model, &source, y, |_, yi, mu, s2| {
        let s = s2 + noise_var;
        let v = yi - mu;
        Ok((yi, noise_var, -0.5 * (LN_2PI + s.ln() + v * v / s), false))
    })
}

/// Output of [`steady_gaussian_filter`].
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyFilterOutput {
    /// Filtered state means `m̂ᶠᵢ`.
    pub states: Vec<Vector>,
    /// Latent filtered means `hᵀ m̂ᶠᵢ`.
    pub mean: Vec<f64>,
    /// Innovations `v̂ᵢ = yᵢ − hᵀ A m̂ᶠᵢ₋₁` (`NaN` for missing).
    pub innovations: Vec<f64>,
    /// Stationary innovation variance `ŝ = hᵀ P̂ᵖ h + σ²_n`.
    pub innovation_var: f64,
    /// `−(n/2) log 2πŝ − Σ v̂ᵢ²/(2ŝ)` over observed steps.
    pub log_lik: f64,
}

/// Time-invariant filter with the stationary gain from the start:
/// `m̂ᶠᵢ = (A − k hᵀ A) m̂ᶠᵢ₋₁ + k yᵢ`. Missing `yᵢ` only propagates the mean.
pub fn steady_gaussian_filter(
    model: &DiscreteModel,
    pp: &crate::Mat,
    noise_var: f64,
    y: &[f64],
) -> Result<SteadyFilterOutput> {
    let m = model.dim();
    if pp.shape() != (m, m) {
        return Err(Error::Dimension(format!(
            "stationary covariance is {:?}, model dimension {m}",
            pp.shape()
        )));
    }
    if !(noise_var > 0.0) {
        return Err(Error::ParameterDomain(format!(
            "noise variance must be positive, got {noise_var}"
        )));
    }
    let h = &model.h;
    let pph = pp * h;
    let s = h.dot(&pph) + noise_var;
    let k = &pph / s;
    let mut mf = Vector::zeros(m);
    let mut mp = Vector::zeros(m);
    let mut states = Vec::with_capacity(y.len());
    let mut mean = Vec::with_capacity(y.len());
    let mut innovations = Vec::with_capacity(y.len());
    let mut sq = 0.0;
    let mut observed = 0usize;
    for (i, &yi) in y.iter().enumerate() {
        if i > 0 {
            mp.gemv(1.0, &model.a, &mf, 0.0);
        }
        mf.copy_from(&mp);
        if yi.is_nan() {
            innovations.push(f64::NAN);
        } else {
            let v = yi - h.dot(&mp);
            mf.axpy(v, &k, 1.0);
            sq += v * v;
            observed += 1;
            innovations.push(v);
        }
        mean.push(h.dot(&mf));
        states.push(mf.clone());
    }
    let log_lik = -0.5 * observed as f64 * (LN_2PI + s.ln()) - sq / (2.0 * s);
    Ok(SteadyFilterOutput {
        states,
        mean,
        innovations,
        innovation_var: s,
        log_lik,
    })
}
