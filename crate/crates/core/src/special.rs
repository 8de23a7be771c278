//! Scalar special functions: standard normal tails and scaled modified Bessel
//! functions of the first kind.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

pub const LN_2PI: f64 = 1.837_877_066_409_345_5;
const FRAC_1_SQRT_2: f64 = core::f64::consts::FRAC_1_SQRT_2;

/// Standard normal density.
pub fn norm_pdf(z: f64) -> f64 {
    (-0.5 * z * z - 0.5 * LN_2PI).exp()
}

/// Standard normal CDF.
pub fn norm_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * FRAC_1_SQRT_2)
}

/// Mills ratio `R(x) = (1 − Φ(x)) / φ(x)` for `x ≥ 0` via its continued
/// fraction; accurate where the direct ratio underflows.
fn mills_ratio_upper(x: f64) -> f64 {
    // R(x) = 1/(x + 1/(x + 2/(x + 3/(x + …)))), evaluated bottom-up.
    let mut t = x;
    for k in (1..=120).rev() {
        t = x + k as f64 / t;
    }
    1.0 / t
}

/// `log Φ(z)`, stable for large negative `z`.
pub fn log_norm_cdf(z: f64) -> f64 {
    if z > -5.0 {
        norm_cdf(z).ln()
    } else {
        -0.5 * z * z - 0.5 * LN_2PI + mills_ratio_upper(-z).ln()
    }
}

/// `φ(z) / Φ(z)`, stable for large negative `z`.
pub fn norm_pdf_over_cdf(z: f64) -> f64 {
    if z > -5.0 {
        norm_pdf(z) / norm_cdf(z)
    } else {
        1.0 / mills_ratio_upper(-z)
    }
}

/// `ln Γ(x)`.
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// `exp(−x)·I_j(x)` for `j = 0..=order` and `x ≥ 0`, by Miller's backward
/// recurrence normalized with `I₀ + 2 Σ I_k = eˣ`.
pub fn scaled_bessel_i(order: usize, x: f64) -> Vec<f64> {
    assert!(x >= 0.0, "scaled_bessel_i needs x ≥ 0");
    if x == 0.0 {
        let mut out = vec![0.0; order + 1];
        out[0] = 1.0;
        return out;
    }
    let start = order + 32 + (x + 12.0 * x.sqrt()).ceil() as usize;
    let mut vals = vec![0.0f64; start + 2];
    vals[start] = 1e-280;
    for k in (1..=start).rev() {
        vals[k - 1] = vals[k + 1] + (2.0 * k as f64 / x) * vals[k];
        if vals[k - 1] > 1e250 {
            for v in vals[k - 1..].iter_mut() {
                *v *= 1e-250;
            }
        }
    }
    let total = vals[0] + 2.0 * vals[1..=start].iter().sum::<f64>();
    vals.truncate(order + 1);
    for v in vals.iter_mut() {
        *v /= total;
    }
    vals
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Power series `I_j(x) = Σ (x/2)^{2k+j} / (k! (k+j)!)`, oracle for moderate x.
    fn bessel_series(j: usize, x: f64) -> f64 {
        let mut term = (0.5 * x).powi(j as i32) / (1..=j).map(|v| v as f64).product::<f64>();
        let mut sum = term;
        for k in 1..200 {
            term *= 0.25 * x * x / (k as f64 * (k + j) as f64);
            sum += term;
            if term < 1e-18 * sum {
                break;
            }
        }
        sum
    }

    #[test]
    fn scaled_bessel_matches_series() {
        for &x in &[1e-4, 0.3, 1.0, 4.0, 17.0, 40.0] {
            let got = scaled_bessel_i(8, x);
            for (j, g) in got.iter().enumerate() {
                let want = bessel_series(j, x) * (-x).exp();
                assert_relative_eq!(*g, want, max_relative = 1e-11, epsilon = 1e-300);
            }
        }
    }

    #[test]
    fn scaled_bessel_large_argument_normalizes() {
        let x = 2500.0;
        let v = scaled_bessel_i(3, x);
        // Asymptotically e^{-x} I_0(x) ≈ 1/sqrt(2πx).
        assert_relative_eq!(v[0], 1.0 / (2.0 * core::f64::consts::PI * x).sqrt(), max_relative = 1e-4);
    }

    #[test]
    fn log_norm_cdf_tails() {
        assert_relative_eq!(log_norm_cdf(0.0), 0.5f64.ln(), max_relative = 1e-15);
        // Continuity across the branch switch.
        let a = norm_cdf(-5.0).ln();
        let b = -12.5 - 0.5 * LN_2PI + mills_ratio_upper(5.0).ln();
        assert_relative_eq!(a, b, max_relative = 1e-12);
        assert!(log_norm_cdf(-60.0).is_finite());
        assert_relative_eq!(norm_pdf_over_cdf(-40.0), 40.0, max_relative = 1e-3);
    }
}
