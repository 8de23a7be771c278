//! Likelihoods and single-pass moment matching into Gaussian sites.
//!
//! Each observation `y` with cavity `N(f | μ, σ²)` becomes a pseudo-observation
//! `η` with pseudo-variance `γ` such that `N(η | f, γ) N(f | μ, σ²)` has the
//! same first two moments as the tilted distribution `p(y | f) N(f | μ, σ²)`.

pub mod quadrature;

pub use quadrature::GaussHermite;

use alloc::format;

#[allow(unused_imports)]
use num_traits::Float;

use crate::special::{ln_gamma, log_norm_cdf, norm_pdf_over_cdf, LN_2PI};
use crate::{Error, Result};

/// Site precisions at or below this are treated as "no information".
pub const TAU_MIN: f64 = 1e-10;
/// Default Gauss–Hermite order.
pub const DEFAULT_QUADRATURE_ORDER: usize = 31;

/// Observation model `p(y | f)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Likelihood {
    /// `N(y | f, σ²_n)`.
    Gaussian { noise_var: f64 },
    /// `Poisson(y | exp(f))` for non-negative integer counts.
    Poisson,
    /// `σ(y f)` with labels `y ∈ {−1, +1}`.
    BernoulliLogit,
    /// `Φ(y f)` with labels `y ∈ {−1, +1}`.
    BernoulliProbit,
}

/// A likelihood together with its quadrature rule.
#[derive(Debug, Clone, PartialEq)]
pub struct LikelihoodModel {
    pub kind: Likelihood,
    rule: GaussHermite,
}

/// Gaussian site from one moment-matching step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SitePair {
    /// Pseudo-observation `ν/τ`.
    pub eta: f64,
    /// Pseudo-variance `1/τ`; infinite when the site carries no information.
    pub gamma: f64,
    /// Log normalizer of the tilted distribution.
    pub log_z: f64,
    /// Whether a non-positive site precision was replaced by `γ = ∞`.
    pub clamped: bool,
}

impl SitePair {
    /// Site for a missing observation.
    pub fn missing() -> Self {
        SitePair {
            eta: 0.0,
            gamma: f64::INFINITY,
            log_z: 0.0,
            clamped: false,
        }
    }
}

/// Normalizer and moments of the tilted distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TiltedMoments {
    pub log_z: f64,
    pub mean: f64,
    pub var: f64,
}

impl LikelihoodModel {
    pub fn new(kind: Likelihood) -> Result<Self> {
        Self::with_order(kind, DEFAULT_QUADRATURE_ORDER)
    }

    pub fn gaussian(noise_var: f64) -> Result<Self> {
        Self::new(Likelihood::Gaussian { noise_var })
    }

    pub fn with_order(kind: Likelihood, order: usize) -> Result<Self> {
        if let Likelihood::Gaussian { noise_var } = kind {
            if !(noise_var > 0.0 && noise_var.is_finite()) {
                return Err(Error::ParameterDomain(format!(
                    "Gaussian noise variance must be positive, got {noise_var}"
                )));
            }
        }
        if order < 11 || order % 2 == 0 || order > quadrature::MAX_ORDER {
            return Err(Error::ParameterDomain(format!(
                "quadrature order must be odd and in 11..=255, got {order}"
            )));
        }
        Ok(LikelihoodModel {
            kind,
            rule: GaussHermite::new(order),
        })
    }

    pub fn quadrature_order(&self) -> usize {
        self.rule.order()
    }

    pub fn is_gaussian(&self) -> bool {
        matches!(self.kind, Likelihood::Gaussian { .. })
    }

    /// Gaussian noise variance, if this is the Gaussian likelihood.
    pub fn noise_var(&self) -> Option<f64> {
        match self.kind {
            Likelihood::Gaussian { noise_var } => Some(noise_var),
            _ => None,
        }
    }

    /// Check that `y` is in the support of the likelihood.
    pub fn check_support(&self, y: f64) -> Result<()> {
        let ok = match self.kind {
            Likelihood::Gaussian { .. } => y.is_finite(),
            Likelihood::Poisson => y >= 0.0 && y.fract() == 0.0 && y.is_finite(),
            Likelihood::BernoulliLogit | Likelihood::BernoulliProbit => y == 1.0 || y == -1.0,
        };
        if ok {
            Ok(())
        } else {
            let reason = match self.kind {
                Likelihood::Gaussian { .. } => "Gaussian observations must be finite",
                Likelihood::Poisson => "Poisson observations must be non-negative integers",
                _ => "class labels must be -1 or +1",
            };
            Err(Error::Support { value: y, reason })
        }
    }

    /// `log p(y | f)`.
    pub fn eval_log_density(&self, y: f64, f: f64) -> Result<f64> {
        self.check_support(y)?;
        Ok(self.log_density_unchecked(y, f))
    }

    fn log_density_unchecked(&self, y: f64, f: f64) -> f64 {
        match self.kind {
            Likelihood::Gaussian { noise_var } => {
                let r = y - f;
                -0.5 * (LN_2PI + noise_var.ln() + r * r / noise_var)
            }
            Likelihood::Poisson => y * f - f.exp() - ln_gamma(y + 1.0),
            Likelihood::BernoulliLogit => -softplus(-y * f),
            Likelihood::BernoulliProbit => log_norm_cdf(y * f),
        }
    }

    /// First and second derivative of `log p(y | f)` in `f` (for the
    /// likelihoods that use quadrature).
    fn log_density_derivatives(&self, y: f64, f: f64) -> (f64, f64) {
        match self.kind {
            Likelihood::Gaussian { noise_var } => ((y - f) / noise_var, -1.0 / noise_var),
            Likelihood::Poisson => {
                let e = f.exp();
                (y - e, -e)
            }
            Likelihood::BernoulliLogit => {
                let p = sigmoid(f);
                (y * sigmoid(-y * f), -p * (1.0 - p))
            }
            Likelihood::BernoulliProbit => {
                let z = y * f;
                let r = norm_pdf_over_cdf(z);
                (y * r, -r * (z + r))
            }
        }
    }

    /// Normalizer and moments of `p(y | f) N(f | mu, s2)`: closed form for the
    /// Gaussian and probit likelihoods, adaptive Gauss–Hermite otherwise.
    pub fn tilted_moments(&self, y: f64, mu: f64, s2: f64) -> Result<TiltedMoments> {
        self.check_support(y)?;
        check_cavity(mu, s2)?;
        match self.kind {
            Likelihood::Gaussian { noise_var } => {
                let s = s2 + noise_var;
                let v = y - mu;
                Ok(TiltedMoments {
                    log_z: -0.5 * (LN_2PI + s.ln() + v * v / s),
                    mean: mu + s2 / s * v,
                    var: s2 - s2 * s2 / s,
                })
            }
            Likelihood::BernoulliProbit => {
                let d = (1.0 + s2).sqrt();
                let z = y * mu / d;
                let r = norm_pdf_over_cdf(z);
                Ok(TiltedMoments {
                    log_z: log_norm_cdf(z),
                    mean: mu + y * s2 * r / d,
                    var: s2 - s2 * s2 * r * (z + r) / (1.0 + s2),
                })
            }
            _ => self.quadrature_moments(y, mu, s2),
        }
    }

    /// Tilted moments by quadrature for any likelihood (used as the generic
    /// path and to cross-check the closed forms).
    pub fn moment_match_quadrature(&self, y: f64, mu: f64, s2: f64) -> Result<TiltedMoments> {
        self.check_support(y)?;
        check_cavity(mu, s2)?;
        self.quadrature_moments(y, mu, s2)
    }

    /// Rule centred at the tilted mode with the Laplace scale `√(2/c)`.
    fn quadrature_moments(&self, y: f64, mu: f64, s2: f64) -> Result<TiltedMoments> {
        let (mode, curvature) = self.tilted_mode(y, mu, s2)?;
        self.rule_moments(y, mu, s2, mode, (2.0 / curvature).sqrt())
    }

    fn rule_moments(&self, y: f64, mu: f64, s2: f64, centre: f64, scale: f64) -> Result<TiltedMoments> {
        let log_norm = -0.5 * (LN_2PI + s2.ln());
        let log_tilted = |f: f64| {
            let r = f - mu;
            self.log_density_unchecked(y, f) - 0.5 * r * r / s2 + log_norm
        };
        // ∫ g(f) df = scale Σ wₖ g(centre + scale xₖ) e^{xₖ²}
        let nodes = self.rule.nodes();
        let ln_w = self.rule.ln_weights();
        let mut terms = [0.0f64; quadrature::MAX_ORDER];
        let terms = &mut terms[..nodes.len()];
        let mut peak = f64::NEG_INFINITY;
        for (t, (x, lw)) in terms.iter_mut().zip(nodes.iter().zip(ln_w)) {
            *t = lw + x * x + log_tilted(centre + scale * x);
            if *t > peak {
                peak = *t;
            }
        }
        if !peak.is_finite() {
            return Err(Error::Degenerate {
                step: 0,
                value: peak,
            });
        }
        let mut z = 0.0;
        let mut m1 = 0.0;
        for (t, x) in terms.iter().zip(nodes) {
            let w = (t - peak).exp();
            z += w;
            m1 += w * x;
        }
        let mean_x = m1 / z;
        let mut m2 = 0.0;
        for (t, x) in terms.iter().zip(nodes) {
            let d = x - mean_x;
            m2 += (t - peak).exp() * d * d;
        }
        Ok(TiltedMoments {
            log_z: peak + z.ln() + scale.ln(),
            mean: centre + scale * mean_x,
            var: scale * scale * m2 / z,
        })
    }

    /// Mode of the tilted log density and the negated second derivative there.
    fn tilted_mode(&self, y: f64, mu: f64, s2: f64) -> Result<(f64, f64)> {
        let objective = |f: f64| {
            let r = f - mu;
            self.log_density_unchecked(y, f) - 0.5 * r * r / s2
        };
        let mut f = mu;
        let mut value = objective(f);
        for _ in 0..200 {
            let (d1, d2) = self.log_density_derivatives(y, f);
            let grad = d1 - (f - mu) / s2;
            let hess = d2 - 1.0 / s2;
            let mut step = -grad / hess;
            // Backtrack until the (concave) objective increases.
            let mut accepted = false;
            for _ in 0..60 {
                let cand = f + step;
                let cv = objective(cand);
                if cv >= value || !value.is_finite() {
                    f = cand;
                    value = cv;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if !accepted || step.abs() <= 1e-13 * (1.0 + f.abs()) {
                break;
            }
        }
        let (_, d2) = self.log_density_derivatives(y, f);
        let curvature = 1.0 / s2 - d2;
        if !(curvature > 0.0 && curvature.is_finite() && f.is_finite()) {
            return Err(Error::Degenerate {
                step: 0,
                value: curvature,
            });
        }
        Ok((f, curvature))
    }

    /// Gaussian site `(η, γ)` for observation `y` under cavity `N(mu, s2)`.
    pub fn moment_match(&self, y: f64, mu: f64, s2: f64) -> Result<SitePair> {
        if let Likelihood::Gaussian { noise_var } = self.kind {
            let t = self.tilted_moments(y, mu, s2)?;
            return Ok(SitePair {
                eta: y,
                gamma: noise_var,
                log_z: t.log_z,
                clamped: false,
            });
        }
        let t = self.tilted_moments(y, mu, s2)?;
        Ok(site_from_moments(t, mu, s2))
    }
}

/// Convert matched moments into site parameters, clamping tiny precisions.
pub fn site_from_moments(t: TiltedMoments, mu: f64, s2: f64) -> SitePair {
    let tau = 1.0 / t.var - 1.0 / s2;
    if !(tau > TAU_MIN) || !t.var.is_finite() {
        return SitePair {
            eta: 0.0,
            gamma: f64::INFINITY,
            log_z: t.log_z,
            clamped: true,
        };
    }
    let nu = t.mean / t.var - mu / s2;
    SitePair {
        eta: nu / tau,
        gamma: 1.0 / tau,
        log_z: t.log_z,
        clamped: false,
    }
}

fn check_cavity(mu: f64, s2: f64) -> Result<()> {
    if !(s2 > 0.0 && s2.is_finite()) || !mu.is_finite() {
        return Err(Error::Degenerate {
            step: 0,
            value: s2,
        });
    }
    Ok(())
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + eˣ)` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}
