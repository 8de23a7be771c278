//! JSON run configuration.
//!
//! Kernels use an externally tagged form, e.g.
//! `{"sum": [{"matern": {"nu": 1.5, "sigma2": 1.0, "ell": 0.5}},
//!           {"periodic": {"sigma2": 1.0, "ell": 1.0, "period": 7.0}}]}`.

use std::path::Path;

use ihgp_core::grad::OptimOptions;
use ihgp_core::lik::{Likelihood, LikelihoodModel};
use ihgp_core::{GridOptions, KernelSpec, MaternOrder};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

fn default_harmonics() -> usize {
    6
}

/// Serialized kernel specification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum KernelConfig {
    Matern {
        nu: f64,
        sigma2: f64,
        ell: f64,
    },
    Periodic {
        sigma2: f64,
        ell: f64,
        period: f64,
        #[serde(default = "default_harmonics")]
        harmonics: usize,
    },
    Sum(Vec<KernelConfig>),
    Product(Vec<KernelConfig>),
}

impl KernelConfig {
    pub fn to_spec(&self) -> CliResult<KernelSpec> {
        let spec = match self {
            KernelConfig::Matern { nu, sigma2, ell } => KernelSpec::matern(*nu, *sigma2, *ell)?,
            KernelConfig::Periodic {
                sigma2,
                ell,
                period,
                harmonics,
            } => KernelSpec::Periodic {
                sigma2: *sigma2,
                ell: *ell,
                period: *period,
                harmonics: *harmonics,
            },
            KernelConfig::Sum(parts) => {
                KernelSpec::Sum(parts.iter().map(|p| p.to_spec()).collect::<CliResult<_>>()?)
            }
            KernelConfig::Product(parts) => {
                KernelSpec::Product(parts.iter().map(|p| p.to_spec()).collect::<CliResult<_>>()?)
            }
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_spec(spec: &KernelSpec) -> Self {
        match spec {
            KernelSpec::Matern { order, sigma2, ell } => KernelConfig::Matern {
                nu: order.nu(),
                sigma2: *sigma2,
                ell: *ell,
            },
            KernelSpec::Periodic {
                sigma2,
                ell,
                period,
                harmonics,
            } => KernelConfig::Periodic {
                sigma2: *sigma2,
                ell: *ell,
                period: *period,
                harmonics: *harmonics,
            },
            KernelSpec::Sum(parts) => KernelConfig::Sum(parts.iter().map(Self::from_spec).collect()),
            KernelSpec::Product(parts) => {
                KernelConfig::Product(parts.iter().map(Self::from_spec).collect())
            }
        }
    }

    /// Sum of `count` Matérn(3/2) components with spread length-scales.
    pub fn matern32_sum(count: usize) -> Self {
        KernelConfig::Sum(
            (0..count)
                .map(|i| KernelConfig::Matern {
                    nu: MaternOrder::ThreeHalves.nu(),
                    sigma2: 1.0 / count as f64,
                    ell: 0.1 * 1.5f64.powi(i as i32 % 12),
                })
                .collect(),
        )
    }
}

/// Observation model. Unit variants are written as plain strings
/// (`"poisson"`), the Gaussian one as `{"gaussian": {"noise_var": 0.1}}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum LikelihoodConfig {
    Gaussian { noise_var: f64 },
    Poisson,
    Logit,
    Probit,
}

impl LikelihoodConfig {
    pub fn to_model(self, order: Option<usize>) -> CliResult<LikelihoodModel> {
        let kind = match self {
            LikelihoodConfig::Gaussian { noise_var } => Likelihood::Gaussian { noise_var },
            LikelihoodConfig::Poisson => Likelihood::Poisson,
            LikelihoodConfig::Logit => Likelihood::BernoulliLogit,
            LikelihoodConfig::Probit => Likelihood::BernoulliProbit,
        };
        Ok(match order {
            Some(o) => LikelihoodModel::with_order(kind, o)?,
            None => LikelihoodModel::new(kind)?,
        })
    }

    pub fn noise_var(self) -> Option<f64> {
        match self {
            LikelihoodConfig::Gaussian { noise_var } => Some(noise_var),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Kalman filter / ADF with the RTS smoother, `O(m³ n)`.
    Exact,
    /// Infinite-horizon approximation, `O(m² n)`.
    #[default]
    Ihgp,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Exact => "exact",
            Method::Ihgp => "ihgp",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub k: usize,
    pub gamma_min: f64,
    pub gamma_max: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        let d = GridOptions::default();
        GridConfig {
            k: d.k,
            gamma_min: d.gamma_min,
            gamma_max: d.gamma_max,
        }
    }
}

impl From<GridConfig> for GridOptions {
    fn from(g: GridConfig) -> Self {
        GridOptions {
            k: g.k,
            gamma_min: g.gamma_min,
            gamma_max: g.gamma_max,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub max_iters: usize,
    pub grad_tol: f64,
    pub max_step: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        let d = OptimOptions::default();
        OptimizerConfig {
            max_iters: d.max_iters,
            grad_tol: d.grad_tol,
            max_step: d.max_step,
        }
    }
}

impl From<OptimizerConfig> for OptimOptions {
    fn from(o: OptimizerConfig) -> Self {
        OptimOptions {
            max_iters: o.max_iters,
            grad_tol: o.grad_tol,
            max_step: o.max_step,
            ..OptimOptions::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OnlineConfig {
    /// One rate per hyperparameter (noise last) or a single shared rate.
    pub eta: Vec<f64>,
    pub window: usize,
    pub step: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LgcpConfig {
    pub bin_width: f64,
    /// Defaults to the first event time.
    pub t0: Option<f64>,
    /// Defaults to just past the last event time.
    pub t1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    /// State dimensions; each is realized as `m / 2` summed Matérn(3/2) terms.
    pub m: Vec<usize>,
    pub n: usize,
    pub reps: usize,
    pub noise_var: f64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            m: vec![2, 10, 20, 30, 40, 50, 60, 70, 80, 90, 100],
            n: 10_000,
            reps: 3,
            noise_var: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SincMode {
    Regression,
    /// Signs of the noise-free function.
    Classification,
    /// Signs of the noisy regression observations.
    Thresholded,
    Poisson,
}

/// Synthetic data generators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum GenConfig {
    Sinc {
        n: usize,
        mode: SincMode,
    },
    /// Draws from the configured kernel whose magnitude is multiplied by
    /// `scale` from index `switch_at` on.
    RegimeSwitch {
        n: usize,
        dt: f64,
        noise_var: f64,
        switch_at: usize,
        scale: f64,
    },
    /// Poisson events with intensity `base + amplitude sin(2π t / period)`.
    Events {
        t1: f64,
        base: f64,
        amplitude: f64,
        period: f64,
    },
}

/// Complete configuration for one invocation. Fields not used by the chosen
/// subcommand may be omitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub kernel: Option<KernelConfig>,
    #[serde(default = "default_likelihood")]
    pub likelihood: LikelihoodConfig,
    pub quadrature_order: Option<usize>,
    /// Sampling interval; inferred from the `t` column when absent.
    pub dt: Option<f64>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub method: Method,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    pub online: Option<OnlineConfig>,
    pub lgcp: Option<LgcpConfig>,
    #[serde(default)]
    pub bench: BenchConfig,
    pub generate: Option<GenConfig>,
    #[serde(default)]
    pub seed: u64,
}

fn default_likelihood() -> LikelihoodConfig {
    LikelihoodConfig::Gaussian { noise_var: 0.1 }
}

impl RunConfig {
    pub fn from_json(text: &str) -> CliResult<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn kernel_spec(&self) -> CliResult<KernelSpec> {
        self.kernel
            .as_ref()
            .ok_or_else(|| CliError::Config("config: `kernel` is required for this command".into()))?
            .to_spec()
    }

    pub fn likelihood_model(&self) -> CliResult<LikelihoodModel> {
        self.likelihood.to_model(self.quadrature_order)
    }

    pub fn gaussian_noise(&self, command: &str) -> CliResult<f64> {
        self.likelihood.noise_var().ok_or_else(|| {
            CliError::Config(format!("config: `{command}` needs a gaussian likelihood"))
        })
    }

    pub fn online(&self) -> CliResult<&OnlineConfig> {
        self.online
            .as_ref()
            .ok_or_else(|| CliError::Config("config: `online` section is required".into()))
    }

    pub fn lgcp(&self) -> CliResult<&LgcpConfig> {
        self.lgcp
            .as_ref()
            .ok_or_else(|| CliError::Config("config: `lgcp` section is required".into()))
    }

    pub fn generate(&self) -> CliResult<&GenConfig> {
        self.generate
            .as_ref()
            .ok_or_else(|| CliError::Config("config: `generate` section is required".into()))
    }
}
