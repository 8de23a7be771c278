use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use super::{
    build_matern, build_periodic, combine_product, combine_sum, periodic_weights,
    LtiSde, MaternOrder,
};
use crate::linalg::block_diag;
use crate::{Error, Mat, Result};

/// Covariance function built from Matérn and periodic primitives combined by
/// sums and products.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelSpec {
    Matern {
        order: MaternOrder,
        sigma2: f64,
        ell: f64,
    },
    /// `σ² exp(−2 sin²(π τ / period) / ℓ²)` truncated to `harmonics`.
    Periodic {
        sigma2: f64,
        ell: f64,
        period: f64,
        harmonics: usize,
    },
    Sum(Vec<KernelSpec>),
    Product(Vec<KernelSpec>),
}

/// Derivative of `(F, P∞)` with respect to one log-hyperparameter.
#[derive(Debug, Clone, PartialEq)]
pub struct SdeDerivative {
    pub df: Mat,
    pub dpinf: Mat,
}

impl KernelSpec {
    pub fn matern(nu: f64, sigma2: f64, ell: f64) -> Result<Self> {
        let spec = KernelSpec::Matern {
            order: MaternOrder::from_nu(nu)?,
            sigma2,
            ell,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Periodic kernel with the default truncation of six harmonics.
    pub fn periodic(sigma2: f64, ell: f64, period: f64) -> Self {
        KernelSpec::Periodic {
            sigma2,
            ell,
            period,
            harmonics: 6,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            KernelSpec::Matern { sigma2, ell, .. } => {
                positive("sigma2", *sigma2)?;
                positive("ell", *ell)
            }
            KernelSpec::Periodic {
                sigma2,
                ell,
                period,
                harmonics,
            } => {
                positive("sigma2", *sigma2)?;
                positive("ell", *ell)?;
                positive("period", *period)?;
                if *harmonics < 1 {
                    return Err(Error::ParameterDomain(
                        "periodic kernel needs at least one harmonic".into(),
                    ));
                }
                Ok(())
            }
            KernelSpec::Sum(children) | KernelSpec::Product(children) => {
                if children.is_empty() {
                    return Err(Error::ParameterDomain(
                        "sum/product kernel with no components".into(),
                    ));
                }
                children.iter().try_for_each(KernelSpec::validate)
            }
        }
    }

    pub fn state_dim(&self) -> usize {
        match self {
            KernelSpec::Matern { order, .. } => order.state_dim(),
            KernelSpec::Periodic { harmonics, .. } => 2 * (harmonics + 1),
            KernelSpec::Sum(c) => c.iter().map(KernelSpec::state_dim).sum(),
            KernelSpec::Product(c) => c.iter().map(KernelSpec::state_dim).product(),
        }
    }

    pub fn to_sde(&self) -> Result<LtiSde> {
        match self {
            KernelSpec::Matern { order, sigma2, ell } => build_matern(*order, *sigma2, *ell),
            KernelSpec::Periodic {
                sigma2,
                ell,
                period,
                harmonics,
            } => build_periodic(*sigma2, *ell, *period, *harmonics),
            KernelSpec::Sum(children) => fold(children, combine_sum),
            KernelSpec::Product(children) => fold(children, combine_product),
        }
    }

    /// Names of the learnable hyperparameters, in the order used by
    /// [`log_params`](Self::log_params). Periods and harmonic counts are fixed.
    pub fn param_names(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut leaf = 0;
        self.collect_names(&mut leaf, &mut out);
        out
    }

    fn collect_names(&self, leaf: &mut usize, out: &mut Vec<String>) {
        match self {
            KernelSpec::Matern { order, .. } => {
                let tag = match order {
                    MaternOrder::Half => "matern12",
                    MaternOrder::ThreeHalves => "matern32",
                    MaternOrder::FiveHalves => "matern52",
                };
                out.push(format!("k{leaf}:{tag}.sigma2"));
                out.push(format!("k{leaf}:{tag}.ell"));
                *leaf += 1;
            }
            KernelSpec::Periodic { .. } => {
                out.push(format!("k{leaf}:periodic.sigma2"));
                out.push(format!("k{leaf}:periodic.ell"));
                *leaf += 1;
            }
            KernelSpec::Sum(c) | KernelSpec::Product(c) => {
                for k in c {
                    k.collect_names(leaf, out);
                }
            }
        }
    }

    /// Learnable hyperparameters in log space (`log σ²`, `log ℓ` per leaf).
    pub fn log_params(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.collect_params(&mut out);
        out
    }

    fn collect_params(&self, out: &mut Vec<f64>) {
        match self {
            KernelSpec::Matern { sigma2, ell, .. } | KernelSpec::Periodic { sigma2, ell, .. } => {
                out.push(sigma2.ln());
                out.push(ell.ln());
            }
            KernelSpec::Sum(c) | KernelSpec::Product(c) => {
                for k in c {
                    k.collect_params(out);
                }
            }
        }
    }

    /// Copy of `self` with hyperparameters replaced by `exp(theta)`.
    pub fn with_log_params(&self, theta: &[f64]) -> Result<KernelSpec> {
        let expected = self.log_params().len();
        if theta.len() != expected {
            return Err(Error::Dimension(format!(
                "kernel has {expected} hyperparameters, got {}",
                theta.len()
            )));
        }
        let mut it = theta.iter().copied();
        let spec = self.replace_params(&mut it);
        spec.validate()?;
        Ok(spec)
    }

    fn replace_params(&self, it: &mut impl Iterator<Item = f64>) -> KernelSpec {
        let mut next = || it.next().map(f64::exp).unwrap_or(f64::NAN);
        match self {
            KernelSpec::Matern { order, .. } => {
                let sigma2 = next();
                let ell = next();
                KernelSpec::Matern {
                    order: *order,
                    sigma2,
                    ell,
                }
            }
            KernelSpec::Periodic {
                period, harmonics, ..
            } => {
                let sigma2 = next();
                let ell = next();
                KernelSpec::Periodic {
                    sigma2,
                    ell,
                    period: *period,
                    harmonics: *harmonics,
                }
            }
            KernelSpec::Sum(c) => KernelSpec::Sum(c.iter().map(|k| k.replace_params(it)).collect()),
            KernelSpec::Product(c) => {
                KernelSpec::Product(c.iter().map(|k| k.replace_params(it)).collect())
            }
        }
    }

    /// SDE together with the derivatives of `F` and `P∞` with respect to each
    /// entry of [`log_params`](Self::log_params).
    pub fn sde_with_derivatives(&self) -> Result<(LtiSde, Vec<SdeDerivative>)> {
        self.validate()?;
        match self {
            KernelSpec::Matern { order, sigma2, ell } => {
                let sde = build_matern(*order, *sigma2, *ell)?;
                let lambda = order.rate(*ell);
                let (df_dl, dp_dl) = matern_rate_derivative(*order, *sigma2, lambda);
                let m = sde.dim();
                let d_mag = SdeDerivative {
                    df: Mat::zeros(m, m),
                    dpinf: sde.pinf.clone(),
                };
                // dλ/d(log ℓ) = −λ
                let d_ell = SdeDerivative {
                    df: df_dl * -lambda,
                    dpinf: dp_dl * -lambda,
                };
                Ok((sde, alloc::vec![d_mag, d_ell]))
            }
            KernelSpec::Periodic {
                sigma2,
                ell,
                period,
                harmonics,
            } => {
                let sde = build_periodic(*sigma2, *ell, *period, *harmonics)?;
                let (_, dq) = periodic_weights(*ell, *harmonics);
                let m = sde.dim();
                let mut dp = Mat::zeros(m, m);
                for (j, d) in dq.iter().enumerate() {
                    dp[(2 * j, 2 * j)] = sigma2 * d;
                    dp[(2 * j + 1, 2 * j + 1)] = sigma2 * d;
                }
                let d_mag = SdeDerivative {
                    df: Mat::zeros(m, m),
                    dpinf: sde.pinf.clone(),
                };
                let d_ell = SdeDerivative {
                    df: Mat::zeros(m, m),
                    dpinf: dp,
                };
                Ok((sde, alloc::vec![d_mag, d_ell]))
            }
            KernelSpec::Sum(children) => {
                let (mut acc, mut ders) = children[0].sde_with_derivatives()?;
                for child in &children[1..] {
                    let (c, cd) = child.sde_with_derivatives()?;
                    let (ma, mc) = (acc.dim(), c.dim());
                    let za = Mat::zeros(ma, ma);
                    let zc = Mat::zeros(mc, mc);
                    let mut next: Vec<SdeDerivative> = ders
                        .iter()
                        .map(|d| SdeDerivative {
                            df: block_diag(&d.df, &zc),
                            dpinf: block_diag(&d.dpinf, &zc),
                        })
                        .collect();
                    next.extend(cd.iter().map(|d| SdeDerivative {
                        df: block_diag(&za, &d.df),
                        dpinf: block_diag(&za, &d.dpinf),
                    }));
                    acc = combine_sum(&acc, &c);
                    ders = next;
                }
                Ok((acc, ders))
            }
            KernelSpec::Product(children) => {
                let (mut acc, mut ders) = children[0].sde_with_derivatives()?;
                for child in &children[1..] {
                    let (c, cd) = child.sde_with_derivatives()?;
                    let ia = Mat::identity(acc.dim(), acc.dim());
                    let ic = Mat::identity(c.dim(), c.dim());
                    let mut next: Vec<SdeDerivative> = ders
                        .iter()
                        .map(|d| SdeDerivative {
                            df: d.df.kronecker(&ic),
                            dpinf: d.dpinf.kronecker(&c.pinf),
                        })
                        .collect();
                    next.extend(cd.iter().map(|d| SdeDerivative {
                        df: ia.kronecker(&d.df),
                        dpinf: acc.pinf.kronecker(&d.dpinf),
                    }));
                    acc = combine_product(&acc, &c);
                    ders = next;
                }
                Ok((acc, ders))
            }
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::ParameterDomain(format!(
            "{name} must be positive and finite, got {v}"
        )))
    }
}

fn fold(children: &[KernelSpec], op: fn(&LtiSde, &LtiSde) -> LtiSde) -> Result<LtiSde> {
    let mut iter = children.iter();
    let first = iter
        .next()
        .ok_or_else(|| Error::ParameterDomain("sum/product kernel with no components".into()))?;
    let mut acc = first.to_sde()?;
    for c in iter {
        acc = op(&acc, &c.to_sde()?);
    }
    Ok(acc)
}

/// `(dF/dλ, dP∞/dλ)` for the Matérn blocks.
fn matern_rate_derivative(order: MaternOrder, sigma2: f64, lambda: f64) -> (Mat, Mat) {
    match order {
        MaternOrder::Half => (Mat::from_element(1, 1, -1.0), Mat::zeros(1, 1)),
        MaternOrder::ThreeHalves => (
            Mat::from_row_slice(2, 2, &[0.0, 0.0, -2.0 * lambda, -2.0]),
            Mat::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 2.0 * lambda * sigma2]),
        ),
        MaternOrder::FiveHalves => {
            let dk = 2.0 * lambda * sigma2 / 3.0;
            (
                Mat::from_row_slice(
                    3,
                    3,
                    &[
                        0.0,
                        0.0,
                        0.0,
                        0.0,
                        0.0,
                        0.0,
                        -3.0 * lambda * lambda,
                        -6.0 * lambda,
                        -3.0,
                    ],
                ),
                Mat::from_row_slice(
                    3,
                    3,
                    &[
                        0.0,
                        0.0,
                        -dk,
                        0.0,
                        dk,
                        0.0,
                        -dk,
                        0.0,
                        4.0 * lambda.powi(3) * sigma2,
                    ],
                ),
            )
        }
    }
}
