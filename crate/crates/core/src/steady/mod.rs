//! Steady-state solutions of the filter and smoother recursions for a fixed
//! likelihood variance `γ`, and the log-spaced `γ` grid used to look them up
//! in `O(m²)`.

mod grid;

pub use grid::{build_grid, GammaGrid, GridDiagnostics, GridOptions, Stencil};

use alloc::format;

#[allow(unused_imports)]
use num_traits::Float;

use crate::linalg::{quad_form, solve_discrete_lyapunov, symmetrize};
use crate::ssm::DiscreteModel;
use crate::{Error, Mat, Result, Vector};

/// Maximum number of structure-preserving doubling steps.
const SDA_MAX_ITERS: usize = 64;
/// Maximum number of plain Riccati iterations used as fallback and polish.
const RICCATI_MAX_ITERS: usize = 10_000;
/// Required relative DARE residual.
pub const DARE_TOLERANCE: f64 = 1e-9;

/// Steady-state matrices of the time-invariant filter and smoother at one
/// likelihood variance.
#[derive(Debug, Clone, PartialEq)]
pub struct SteadyStateSet {
    /// Likelihood variance; `f64::INFINITY` for the no-measurement limit.
    pub gamma: f64,
    /// Stationary predictive covariance.
    pub pp: Mat,
    /// Stationary gain `Pp h / (hᵀ Pp h + γ)`.
    pub k: Vector,
    /// Stationary filter covariance `Pp − k hᵀ Pp`.
    pub pf: Mat,
    /// Stationary smoother gain.
    pub g: Mat,
    /// Stationary smoothed covariance.
    pub ps: Mat,
}

/// One Riccati iteration `A (P − P h hᵀ P / (hᵀ P h + γ)) Aᵀ + Q`.
pub fn riccati_step(model: &DiscreteModel, p: &Mat, gamma: f64) -> Mat {
    let pf = filter_covariance(p, &model.h, gamma);
    let mut next = &model.a * pf * model.a.transpose() + &model.q;
    symmetrize(&mut next);
    next
}

/// `‖riccati_step(P) − P‖_F / ‖P‖_F`.
pub fn dare_residual(model: &DiscreteModel, p: &Mat, gamma: f64) -> f64 {
    let r = riccati_step(model, p, gamma) - p;
    r.norm() / p.norm().max(f64::MIN_POSITIVE)
}

/// `P − P h hᵀ P / (hᵀ P h + γ)`; `P` itself when `γ = ∞`.
pub fn filter_covariance(p: &Mat, h: &Vector, gamma: f64) -> Mat {
    if gamma.is_infinite() {
        return p.clone();
    }
    let ph = p * h;
    let s = h.dot(&ph) + gamma;
    let mut pf = p - &ph * ph.transpose() / s;
    symmetrize(&mut pf);
    pf
}

/// Stationary gain `Pp h / (hᵀ Pp h + γ)`; zero for `γ = ∞`.
pub fn stationary_gain(pp: &Mat, h: &Vector, gamma: f64) -> Vector {
    if gamma.is_infinite() {
        return Vector::zeros(h.len());
    }
    let ph = pp * h;
    let s = h.dot(&ph) + gamma;
    ph / s
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && !gamma.is_nan() {
        Ok(())
    } else {
        Err(Error::ParameterDomain(format!(
            "likelihood variance must be positive, got {gamma}"
        )))
    }
}

/// Stabilizing solution `Pp` of the filter DARE
/// `Pp = A Pp Aᵀ − A Pp h (hᵀ Pp h + γ)⁻¹ hᵀ Pp Aᵀ + Q`.
///
/// Solved by structure-preserving doubling and polished with plain Riccati
/// steps; falls back to Riccati iteration if doubling breaks down. `γ = ∞`
/// returns the initial (stationary) covariance `P0`.
pub fn solve_pp_dare(model: &DiscreteModel, gamma: f64) -> Result<Mat> {
    check_gamma(gamma)?;
    if gamma.is_infinite() {
        return Ok(model.p0.clone());
    }
    let start = match sda(model, gamma) {
        Some(p) => p,
        None => model.p0.clone(),
    };
    polish(model, start, gamma)
}

/// Doubling for the dual (control-form) DARE with `A → Aᵀ`, `G = h hᵀ / γ`,
/// `H = Q`; `H` converges to `Pp`.
fn sda(model: &DiscreteModel, gamma: f64) -> Option<Mat> {
    let m = model.dim();
    let id = Mat::identity(m, m);
    let mut a = model.a.transpose();
    let mut g = &model.h * model.h.transpose() / gamma;
    let mut h = model.q.clone();
    for _ in 0..SDA_MAX_ITERS {
        let w = &id + &g * &h;
        let lu = w.lu();
        let wa = lu.solve(&a)?;
        let wg = lu.solve(&g)?;
        let at = a.transpose();
        let h_next = &h + &at * &h * &wa;
        let g_next = &g + &a * wg * &at;
        let a_next = &a * wa;
        let change = (&h_next - &h).norm();
        h = h_next;
        g = g_next;
        a = a_next;
        symmetrize(&mut h);
        symmetrize(&mut g);
        if !h.iter().all(|v| v.is_finite()) {
            return None;
        }
        if change <= 1e-15 * h.norm() || a.norm() <= 1e-300 {
            return Some(h);
        }
    }
    Some(h)
}

fn polish(model: &DiscreteModel, mut p: Mat, gamma: f64) -> Result<Mat> {
    let mut residual = f64::INFINITY;
    for it in 0..RICCATI_MAX_ITERS {
        let next = riccati_step(model, &p, gamma);
        let change = (&next - &p).norm();
        let scale = next.norm().max(f64::MIN_POSITIVE);
        p = next;
        residual = change / scale;
        if !residual.is_finite() {
            break;
        }
        // A few sweeps suffice after doubling; the rest only runs on fallback.
        if residual <= 1e-13 || (it >= 2 && residual <= DARE_TOLERANCE * 1e-2) {
            return Ok(p);
        }
    }
    let final_residual = dare_residual(model, &p, gamma);
    if final_residual <= DARE_TOLERANCE {
        Ok(p)
    } else {
        Err(Error::NoConvergence {
            solver: "DARE",
            iterations: RICCATI_MAX_ITERS,
            residual: final_residual.min(residual),
        })
    }
}

/// Stationary smoother gain `G = Pf Aᵀ (A Pf Aᵀ + Q)⁻¹` and covariance `Ps`
/// solving `Ps = G Ps Gᵀ + Pf − G (A Pf Aᵀ + Q) Gᵀ`.
pub fn solve_smoother_pair(model: &DiscreteModel, pf: &Mat) -> Result<(Mat, Mat)> {
    let mut pp_next = &model.a * pf * model.a.transpose() + &model.q;
    symmetrize(&mut pp_next);
    let apf = &model.a * pf;
    // Pp' Gᵀ = A Pf
    let gt = match pp_next.clone().cholesky() {
        Some(c) => c.solve(&apf),
        None => pp_next
            .clone()
            .lu()
            .solve(&apf)
            .ok_or(Error::Conditioning("A Pf Aᵀ + Q is singular"))?,
    };
    let g = gt.transpose();
    if !g.iter().all(|v| v.is_finite()) {
        return Err(Error::Conditioning("A Pf Aᵀ + Q is singular"));
    }
    let mut w = pf - &g * &pp_next * g.transpose();
    symmetrize(&mut w);
    let mut ps = solve_discrete_lyapunov(&g, &w)?;
    symmetrize(&mut ps);
    Ok((g, ps))
}

/// `‖G Ps Gᵀ + W − Ps‖_F / ‖Ps‖_F` for the smoother fixed point.
pub fn smoother_residual(model: &DiscreteModel, set: &SteadyStateSet) -> f64 {
    let pp_next = &model.a * &set.pf * model.a.transpose() + &model.q;
    let w = &set.pf - &set.g * &pp_next * set.g.transpose();
    let r = &set.g * &set.ps * set.g.transpose() + w - &set.ps;
    r.norm() / set.ps.norm().max(f64::MIN_POSITIVE)
}

/// Full steady-state set at one likelihood variance (`γ = ∞` allowed).
pub fn steady_state(model: &DiscreteModel, gamma: f64) -> Result<SteadyStateSet> {
    let pp = solve_pp_dare(model, gamma)?;
    let k = stationary_gain(&pp, &model.h, gamma);
    let pf = filter_covariance(&pp, &model.h, gamma);
    let (g, ps) = solve_smoother_pair(model, &pf)?;
    Ok(SteadyStateSet {
        gamma,
        pp,
        k,
        pf,
        g,
        ps,
    })
}

impl SteadyStateSet {
    /// `hᵀ Pp h`.
    pub fn predictive_variance(&self, h: &Vector) -> f64 {
        quad_form(&self.pp, h)
    }

    /// `hᵀ Ps h`.
    pub fn smoothed_variance(&self, h: &Vector) -> f64 {
        quad_form(&self.ps, h)
    }
}
