//! Incremental gradient learning on a rolling window of a stream:
//! `θⱼ = θⱼ₋₁ + η ⊙ ∇ log p(y⁽ʲ⁾ | θⱼ₋₁)`.

use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use super::{objective, HyperParams};
use crate::{Error, Result};

/// Result of one online update.
#[derive(Debug, Clone, PartialEq)]
pub struct OnlineStep {
    /// Parameters after the step (unchanged if rejected).
    pub params: HyperParams,
    /// Window NLL at the parameters before the step.
    pub nll: f64,
    pub grad: Vec<f64>,
    pub accepted: bool,
    /// Why the step was rejected, if it was.
    pub reason: Option<alloc::string::String>,
}

/// One ascent step on the window's steady-state log likelihood.
///
/// `eta` holds one learning rate per hyperparameter (a single entry is
/// broadcast); zero rates freeze the corresponding parameter. A non-finite
/// objective or gradient rejects the step and leaves `θ` unchanged.
pub fn online_step(params: &HyperParams, batch: &[f64], eta: &[f64], dt: f64) -> Result<OnlineStep> {
    if batch.is_empty() {
        return Err(Error::Input("empty window".into()));
    }
    let n = params.len();
    if !(eta.len() == 1 || eta.len() == n) {
        return Err(Error::Dimension(format!(
            "{} learning rates for {n} hyperparameters",
            eta.len()
        )));
    }
    if let Some(bad) = eta.iter().find(|e| !(**e >= 0.0 && e.is_finite())) {
        return Err(Error::ParameterDomain(format!(
            "learning rates must be non-negative, got {bad}"
        )));
    }
    let rate = |j: usize| if eta.len() == 1 { eta[0] } else { eta[j] };
    let reject = |nll: f64, grad: Vec<f64>, why: alloc::string::String| OnlineStep {
        params: params.clone(),
        nll,
        grad,
        accepted: false,
        reason: Some(why),
    };
    let (nll, grad) = match objective(params, dt, batch) {
        Ok(v) => v,
        Err(e) => return Ok(reject(f64::NAN, Vec::new(), format!("{e}"))),
    };
    if !nll.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Ok(reject(nll, grad, "non-finite gradient".into()));
    }
    if eta.iter().all(|&e| e == 0.0) {
        return Ok(OnlineStep {
            params: params.clone(),
            nll,
            grad,
            accepted: true,
            reason: None,
        });
    }
    let theta: Vec<f64> = params
        .theta()
        .iter()
        .enumerate()
        .map(|(j, t)| t - rate(j) * grad[j])
        .collect();
    match params.with_theta(&theta) {
        Ok(next) => Ok(OnlineStep {
            params: next,
            nll,
            grad,
            accepted: true,
            reason: None,
        }),
        Err(e) => Ok(reject(nll, grad, format!("{e}"))),
    }
}

/// Rolling-window learner configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct OnlineOptions {
    /// Learning rates (one per hyperparameter, or a single shared one).
    pub eta: Vec<f64>,
    /// Window length `n_mb`.
    pub window: usize,
    /// Observations the window advances per update.
    pub step: usize,
}

/// Stateful wrapper that feeds consecutive windows of a stream through
/// [`online_step`].
#[derive(Debug, Clone)]
pub struct OnlineLearner {
    params: HyperParams,
    dt: f64,
    options: OnlineOptions,
    updates: usize,
    rejected: usize,
}

impl OnlineLearner {
    pub fn new(params: HyperParams, dt: f64, options: OnlineOptions) -> Result<Self> {
        if options.window == 0 || options.step == 0 {
            return Err(Error::ParameterDomain(
                "online window and step must be positive".into(),
            ));
        }
        Ok(OnlineLearner {
            params,
            dt,
            options,
            updates: 0,
            rejected: 0,
        })
    }

    pub fn params(&self) -> &HyperParams {
        &self.params
    }

    pub fn options(&self) -> &OnlineOptions {
        &self.options
    }

    pub fn updates(&self) -> usize {
        self.updates
    }

    pub fn rejected(&self) -> usize {
        self.rejected
    }

    /// Start offsets of the windows that fit in a stream of length `n`.
    pub fn window_starts(&self, n: usize) -> impl Iterator<Item = usize> {
        let step = self.options.step;
        let last = n.checked_sub(self.options.window);
        (0..).map(move |j| j * step).take_while(move |&s| last.is_some_and(|l| s <= l))
    }

    /// Apply one update on `window`.
    pub fn update(&mut self, window: &[f64]) -> Result<OnlineStep> {
        let step = online_step(&self.params, window, &self.options.eta, self.dt)?;
        self.updates += 1;
        if step.accepted {
            self.params = step.params.clone();
        } else {
            self.rejected += 1;
        }
        Ok(step)
    }
}
