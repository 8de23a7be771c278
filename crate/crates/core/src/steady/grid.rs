//! Log-spaced `γ` grid with cubic convolution (Keys, `a = −1/2`) lookups.

use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use super::{filter_covariance, stationary_gain, steady_state, SteadyStateSet};
use crate::linalg::{project_psd, quad_form, symmetrize};
use crate::ssm::DiscreteModel;
use crate::{Error, Mat, Result, Vector};

/// Slack for the PSD check on interpolated covariances, relative to the trace.
const PSD_SLACK: f64 = 1e-8;

/// Grid construction parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridOptions {
    pub k: usize,
    pub gamma_min: f64,
    pub gamma_max: f64,
}

impl Default for GridOptions {
    fn default() -> Self {
        GridOptions {
            k: 32,
            gamma_min: 1e-2,
            gamma_max: 1e3,
        }
    }
}

/// Per-node quantities needed by the `O(m²)` inference loops.
#[derive(Debug, Clone, PartialEq)]
struct NodeCache {
    pph: Vector,
    hpph: f64,
    hpsh: f64,
}

impl NodeCache {
    fn new(set: &SteadyStateSet, h: &Vector) -> Self {
        let pph = &set.pp * h;
        NodeCache {
            hpph: h.dot(&pph),
            pph,
            hpsh: quad_form(&set.ps, h),
        }
    }
}

/// Interpolation weights over four consecutive nodes starting at `start`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stencil {
    pub start: usize,
    pub weights: [f64; 4],
}

/// Lookup counters for range diagnostics.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GridDiagnostics {
    pub below_range: usize,
    pub above_range: usize,
}

/// Steady-state sets tabulated on a log-spaced `γ` grid plus the `γ = ∞`
/// endpoint and optional exact extra nodes.
#[derive(Debug, Clone)]
pub struct GammaGrid {
    options: GridOptions,
    h: Vector,
    nodes: Vec<f64>,
    log_min: f64,
    log_step: f64,
    sets: Vec<SteadyStateSet>,
    cache: Vec<NodeCache>,
    infinite: SteadyStateSet,
    infinite_cache: NodeCache,
    exact: Vec<(SteadyStateSet, NodeCache)>,
}

/// Solve the steady-state equations at every grid node (setup `O(K m³)`).
pub fn build_grid(model: &DiscreteModel, options: GridOptions) -> Result<GammaGrid> {
    let GridOptions {
        k,
        gamma_min,
        gamma_max,
    } = options;
    if k < 4 {
        return Err(Error::ParameterDomain(format!(
            "grid needs at least 4 nodes, got {k}"
        )));
    }
    if !(gamma_min > 0.0 && gamma_max > gamma_min && gamma_max.is_finite()) {
        return Err(Error::ParameterDomain(format!(
            "grid range must satisfy 0 < gmin < gmax < ∞, got [{gamma_min}, {gamma_max}]"
        )));
    }
    let log_min = gamma_min.ln();
    let log_step = (gamma_max.ln() - log_min) / (k - 1) as f64;
    let mut nodes: Vec<f64> = (0..k).map(|i| (log_min + log_step * i as f64).exp()).collect();
    nodes[0] = gamma_min;
    nodes[k - 1] = gamma_max;

    let sets = solve_nodes(model, &nodes)?;
    let infinite = steady_state(model, f64::INFINITY).map_err(|e| Error::Grid {
        gamma: f64::INFINITY,
        source: alloc::boxed::Box::new(e),
    })?;
    let h = model.h.clone();
    let cache = sets.iter().map(|s| NodeCache::new(s, &h)).collect();
    let infinite_cache = NodeCache::new(&infinite, &h);
    Ok(GammaGrid {
        options,
        h,
        nodes,
        log_min,
        log_step,
        sets,
        cache,
        infinite,
        infinite_cache,
        exact: Vec::new(),
    })
}

fn solve_node(model: &DiscreteModel, gamma: f64) -> Result<SteadyStateSet> {
    steady_state(model, gamma).map_err(|e| Error::Grid {
        gamma,
        source: alloc::boxed::Box::new(e),
    })
}

#[cfg(feature = "parallel")]
fn solve_nodes(model: &DiscreteModel, nodes: &[f64]) -> Result<Vec<SteadyStateSet>> {
    use rayon::prelude::*;
    nodes.par_iter().map(|&g| solve_node(model, g)).collect()
}

#[cfg(not(feature = "parallel"))]
fn solve_nodes(model: &DiscreteModel, nodes: &[f64]) -> Result<Vec<SteadyStateSet>> {
    nodes.iter().map(|&g| solve_node(model, g)).collect()
}

/// Keys cubic convolution kernel with `a = −1/2`.
fn keys(x: f64) -> f64 {
    const A: f64 = -0.5;
    let x = x.abs();
    if x <= 1.0 {
        ((A + 2.0) * x - (A + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        ((A * x - 5.0 * A) * x + 8.0 * A) * x - 4.0 * A
    } else {
        0.0
    }
}

impl GammaGrid {
    pub fn options(&self) -> GridOptions {
        self.options
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn node_sets(&self) -> &[SteadyStateSet] {
        &self.sets
    }

    pub fn infinite(&self) -> &SteadyStateSet {
        &self.infinite
    }

    pub fn state_dim(&self) -> usize {
        self.h.len()
    }

    pub fn measurement(&self) -> &Vector {
        &self.h
    }

    /// Add an exactly solved node (e.g. the Gaussian noise variance) that
    /// lookups at precisely that `γ` return without interpolation.
    pub fn with_exact_node(mut self, model: &DiscreteModel, gamma: f64) -> Result<Self> {
        if gamma.is_infinite() || self.exact_index(gamma).is_some() {
            return Ok(self);
        }
        let set = solve_node(model, gamma)?;
        let cache = NodeCache::new(&set, &self.h);
        self.exact.push((set, cache));
        Ok(self)
    }

    fn exact_index(&self, gamma: f64) -> Option<usize> {
        self.exact.iter().position(|(s, _)| s.gamma == gamma)
    }

    /// Interpolation stencil for `γ`; out-of-range values clamp to the ends.
    ///
    /// Returns `None` for `γ = ∞`. Nodes at the virtual indices `−1` and `K`
    /// use the boundary extrapolation `c₋₁ = 3c₀ − 3c₁ + c₂`.
    pub fn stencil(&self, gamma: f64) -> Option<Stencil> {
        if gamma.is_infinite() {
            return None;
        }
        let k = self.nodes.len();
        let u = ((gamma.ln() - self.log_min) / self.log_step).clamp(0.0, (k - 1) as f64);
        let nearest = u.round();
        if (u - nearest).abs() <= 1e-12 {
            let i = nearest as usize;
            let start = i.min(k - 4);
            let mut weights = [0.0; 4];
            weights[i - start] = 1.0;
            return Some(Stencil { start, weights });
        }
        let i = (u.floor() as usize).min(k - 2);
        let t = u - i as f64;
        let raw = [keys(1.0 + t), keys(t), keys(1.0 - t), keys(2.0 - t)];
        let start = (i as isize - 1).clamp(0, k as isize - 4) as usize;
        let mut weights = [0.0; 4];
        for (offset, w) in raw.iter().enumerate() {
            let idx = i as isize - 1 + offset as isize;
            let mut put = |j: usize, c: f64| weights[j - start] += c * w;
            if idx < 0 {
                put(0, 3.0);
                put(1, -3.0);
                put(2, 1.0);
            } else if idx as usize >= k {
                put(k - 1, 3.0);
                put(k - 2, -3.0);
                put(k - 3, 1.0);
            } else {
                put(idx as usize, 1.0);
            }
        }
        Some(Stencil { start, weights })
    }

    fn combine_mat(&self, st: &Stencil, pick: impl Fn(&SteadyStateSet) -> &Mat) -> Mat {
        let m = self.h.len();
        let mut out = Mat::zeros(m, m);
        for (j, w) in st.weights.iter().enumerate() {
            if *w != 0.0 {
                out += pick(&self.sets[st.start + j]) * *w;
            }
        }
        out
    }

    /// Full interpolated steady-state set at `γ` (`O(m³)` due to the PSD
    /// projection; inference loops use the cached scalar/vector lookups).
    pub fn interp_steady(&self, gamma: f64) -> SteadyStateSet {
        if gamma.is_infinite() {
            return self.infinite.clone();
        }
        if let Some(i) = self.exact_index(gamma) {
            return self.exact[i].0.clone();
        }
        let st = self.stencil(gamma).expect("finite gamma has a stencil");
        if let Some(j) = st.weights.iter().position(|&w| w == 1.0) {
            if st.weights.iter().filter(|&&w| w != 0.0).count() == 1 {
                let mut set = self.sets[st.start + j].clone();
                set.gamma = gamma;
                return set;
            }
        }
        let mut pp = self.combine_mat(&st, |s| &s.pp);
        symmetrize(&mut pp);
        project_psd(&mut pp, PSD_SLACK);
        let mut ps = self.combine_mat(&st, |s| &s.ps);
        symmetrize(&mut ps);
        project_psd(&mut ps, PSD_SLACK);
        let g = self.combine_mat(&st, |s| &s.g);
        let k = stationary_gain(&pp, &self.h, gamma);
        let pf = filter_covariance(&pp, &self.h, gamma);
        SteadyStateSet {
            gamma,
            pp,
            k,
            pf,
            g,
            ps,
        }
    }

    /// Alias of [`interp_steady`](Self::interp_steady).
    pub fn interp(&self, gamma: f64) -> SteadyStateSet {
        self.interp_steady(gamma)
    }

    /// `(Pp(γ) h, hᵀ Pp(γ) h)` in `O(m)`.
    pub(crate) fn predictive(&self, gamma: f64, pph: &mut Vector) -> f64 {
        if gamma.is_infinite() {
            pph.copy_from(&self.infinite_cache.pph);
            return self.infinite_cache.hpph;
        }
        if let Some(i) = self.exact_index(gamma) {
            let c = &self.exact[i].1;
            pph.copy_from(&c.pph);
            return c.hpph;
        }
        let st = self.stencil(gamma).expect("finite gamma has a stencil");
        pph.fill(0.0);
        let mut hpph = 0.0;
        for (j, w) in st.weights.iter().enumerate() {
            if *w != 0.0 {
                let c = &self.cache[st.start + j];
                pph.axpy(*w, &c.pph, 1.0);
                hpph += w * c.hpph;
            }
        }
        hpph.max(0.0)
    }

    /// `out ← G(γ) v` in `O(m²)`.
    pub(crate) fn apply_smoother_gain(&self, gamma: f64, v: &Vector, out: &mut Vector) {
        if gamma.is_infinite() {
            out.gemv(1.0, &self.infinite.g, v, 0.0);
            return;
        }
        if let Some(i) = self.exact_index(gamma) {
            out.gemv(1.0, &self.exact[i].0.g, v, 0.0);
            return;
        }
        let st = self.stencil(gamma).expect("finite gamma has a stencil");
        out.fill(0.0);
        for (j, w) in st.weights.iter().enumerate() {
            if *w != 0.0 {
                out.gemv(*w, &self.sets[st.start + j].g, v, 1.0);
            }
        }
    }

    /// `hᵀ Ps(γ) h` in `O(1)`.
    pub(crate) fn smoothed_variance(&self, gamma: f64) -> f64 {
        if gamma.is_infinite() {
            return self.infinite_cache.hpsh;
        }
        if let Some(i) = self.exact_index(gamma) {
            return self.exact[i].1.hpsh;
        }
        let st = self.stencil(gamma).expect("finite gamma has a stencil");
        let mut v = 0.0;
        for (j, w) in st.weights.iter().enumerate() {
            v += w * self.cache[st.start + j].hpsh;
        }
        v.max(0.0)
    }

    /// Count how many of `gammas` fall outside the tabulated range.
    pub fn range_hits(&self, gammas: &[f64]) -> GridDiagnostics {
        let mut d = GridDiagnostics::default();
        let (lo, hi) = (self.options.gamma_min, self.options.gamma_max);
        for &g in gammas {
            if g.is_infinite() || self.exact_index(g).is_some() {
                continue;
            }
            if g < lo {
                d.below_range += 1;
            } else if g > hi {
                d.above_range += 1;
            }
        }
        d
    }
}
