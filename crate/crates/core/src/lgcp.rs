//! Log-Gaussian Cox process intensity estimation: events are binned on an
//! equidistant grid and each bin count gets a Poisson likelihood with rate
//! `exp(f(t̂ᵢ))`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::exact::{adf_filter, rts_marginals, PosteriorMarginals};
use crate::ihgp::ihgp_infer;
use crate::lik::{Likelihood, LikelihoodModel};
use crate::ssm::{discretize, KernelSpec};
use crate::steady::{build_grid, GridOptions};
use crate::{Error, Result};

/// Two-sided 95% standard normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

/// Event counts on equidistant bins.
#[derive(Debug, Clone, PartialEq)]
pub struct BinnedCounts {
    /// Bin centres.
    pub t_hat: Vec<f64>,
    pub y: Vec<f64>,
    pub bin_width: f64,
    /// Events outside `[t0, t1)` that were not counted.
    pub dropped: usize,
}

impl BinnedCounts {
    pub fn total(&self) -> f64 {
        self.y.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

/// Count sorted `timestamps` into `ceil((t1 − t0) / bin_width)` right-open
/// bins starting at `t0`. Events outside `[t0, t1)` are dropped and counted.
pub fn bin_events(timestamps: &[f64], t0: f64, t1: f64, bin_width: f64) -> Result<BinnedCounts> {
    if !(t0 < t1) || !t0.is_finite() || !t1.is_finite() {
        return Err(Error::Input(format!("need t0 < t1, got [{t0}, {t1})")));
    }
    if !(bin_width > 0.0 && bin_width.is_finite()) {
        return Err(Error::ParameterDomain(format!(
            "bin width must be positive, got {bin_width}"
        )));
    }
    if let Some(i) = timestamps.windows(2).position(|w| !(w[0] <= w[1])) {
        return Err(Error::Input(format!(
            "timestamps are not sorted at index {}",
            i + 1
        )));
    }
    let n = ((t1 - t0) / bin_width).ceil() as usize;
    let mut y = vec![0.0; n];
    let mut dropped = 0;
    for &t in timestamps {
        if !(t >= t0 && t < t1) {
            dropped += 1;
            continue;
        }
        let idx = (((t - t0) / bin_width).floor() as usize).min(n - 1);
        y[idx] += 1.0;
    }
    let t_hat = (0..n).map(|i| t0 + (i as f64 + 0.5) * bin_width).collect();
    Ok(BinnedCounts {
        t_hat,
        y,
        bin_width,
        dropped,
    })
}

/// Posterior over the per-bin intensity `λ = exp(f)` (events per bin).
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityPosterior {
    pub t: Vec<f64>,
    pub median: Vec<f64>,
    pub lower95: Vec<f64>,
    pub upper95: Vec<f64>,
    /// Latent marginals of `f`.
    pub latent: PosteriorMarginals,
    pub bin_width: f64,
}

impl IntensityPosterior {
    /// Per-time-unit rate `median / bin_width`.
    pub fn rate_median(&self) -> Vec<f64> {
        self.median.iter().map(|m| m / self.bin_width).collect()
    }
}

/// Log-normal quantiles `exp(μ)`, `exp(μ ± 1.96σ)` of the latent marginals.
pub fn intensity_quantiles(latent: &PosteriorMarginals) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut med = Vec::with_capacity(latent.len());
    let mut lo = Vec::with_capacity(latent.len());
    let mut hi = Vec::with_capacity(latent.len());
    for (m, v) in latent.mean.iter().zip(&latent.var) {
        let sd = v.max(0.0).sqrt();
        med.push(m.exp());
        lo.push((m - Z95 * sd).exp());
        hi.push((m + Z95 * sd).exp());
    }
    (med, lo, hi)
}

/// Fit the intensity with single-sweep EP, either exactly on the state space
/// or with the infinite-horizon approximation.
pub fn fit_intensity(
    counts: &BinnedCounts,
    spec: &KernelSpec,
    use_ihgp: bool,
    grid: GridOptions,
) -> Result<IntensityPosterior> {
    if counts.is_empty() {
        return Err(Error::Input("no bins".into()));
    }
    let sde = spec.to_sde()?;
    let model = discretize(&sde, counts.bin_width)?;
    let lik = LikelihoodModel::new(Likelihood::Poisson)?;
    let latent = if use_ihgp {
        let grid = build_grid(&model, grid)?;
        ihgp_infer(&model, &grid, &counts.y, &lik)?.marginals
    } else {
        let filt = adf_filter(&model, &counts.y, &lik)?;
        rts_marginals(&model, &filt)?
    };
    let (median, lower95, upper95) = intensity_quantiles(&latent);
    Ok(IntensityPosterior {
        t: counts.t_hat.clone(),
        median,
        lower95,
        upper95,
        latent,
        bin_width: counts.bin_width,
    })
}
