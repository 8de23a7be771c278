//! Small dense linear-algebra helpers: Kronecker products, block assembly,
//! Lyapunov solvers and PSD utilities.

use alloc::format;

#[allow(unused_imports)]
use num_traits::Float;

use crate::{Error, Mat, Result, Vector};

/// Replace `a` by `(a + aᵀ) / 2`.
pub fn symmetrize(a: &mut Mat) {
    let n = a.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
}

pub fn symmetrized(mut a: Mat) -> Mat {
    symmetrize(&mut a);
    a
}

pub fn frobenius(a: &Mat) -> f64 {
    a.norm()
}

pub fn kron(a: &Mat, b: &Mat) -> Mat {
    a.kronecker(b)
}

pub fn kron_vec(a: &Vector, b: &Vector) -> Vector {
    a.kronecker(b)
}

/// Kronecker sum `a ⊗ I + I ⊗ b`.
pub fn kron_sum(a: &Mat, b: &Mat) -> Mat {
    let ia = Mat::identity(a.nrows(), a.ncols());
    let ib = Mat::identity(b.nrows(), b.ncols());
    a.kronecker(&ib) + ia.kronecker(b)
}

pub fn block_diag(a: &Mat, b: &Mat) -> Mat {
    let (ra, ca) = a.shape();
    let (rb, cb) = b.shape();
    let mut out = Mat::zeros(ra + rb, ca + cb);
    out.view_mut((0, 0), (ra, ca)).copy_from(a);
    out.view_mut((ra, ca), (rb, cb)).copy_from(b);
    out
}

pub fn concat(a: &Vector, b: &Vector) -> Vector {
    let mut out = Vector::zeros(a.len() + b.len());
    out.rows_mut(0, a.len()).copy_from(a);
    out.rows_mut(a.len(), b.len()).copy_from(b);
    out
}

/// `hᵀ P h`.
pub fn quad_form(p: &Mat, h: &Vector) -> f64 {
    let ph = p * h;
    h.dot(&ph)
}

/// Largest real part over the eigenvalues of `a`.
pub fn spectral_abscissa(a: &Mat) -> f64 {
    if a.nrows() == 0 {
        return f64::NEG_INFINITY;
    }
    a.clone()
        .complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Largest eigenvalue modulus of `a`.
pub fn spectral_radius(a: &Mat) -> f64 {
    if a.nrows() == 0 {
        return 0.0;
    }
    a.clone()
        .complex_eigenvalues()
        .iter()
        .map(|z| z.re.hypot(z.im))
        .fold(0.0, f64::max)
}

/// Smallest eigenvalue of the symmetric part of `a`.
pub fn min_eigenvalue(a: &Mat) -> f64 {
    if a.nrows() == 0 {
        return 0.0;
    }
    symmetrized(a.clone())
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Symmetrize `a` and, if its smallest eigenvalue falls below
/// `-slack * trace(a)`, clip negative eigenvalues to zero. Returns whether a
/// projection happened.
pub fn project_psd(a: &mut Mat, slack: f64) -> bool {
    symmetrize(a);
    let tol = slack * a.trace().abs();
    let eig = a.clone().symmetric_eigen();
    if eig.eigenvalues.iter().all(|&l| l >= -tol) {
        return false;
    }
    let clipped = eig.eigenvalues.map(|l| l.max(0.0));
    let v = &eig.eigenvectors;
    *a = v * Mat::from_diagonal(&clipped) * v.transpose();
    symmetrize(a);
    true
}

const LYAP_MAX_DOUBLINGS: usize = 200;

/// Solve `X = A X Aᵀ + W` for stable `A` (spectral radius below one) by
/// doubling: `X ← X + Aₖ X Aₖᵀ`, `Aₖ ← Aₖ²`.
pub fn solve_discrete_lyapunov(a: &Mat, w: &Mat) -> Result<Mat> {
    let n = a.nrows();
    if a.ncols() != n || w.shape() != (n, n) {
        return Err(Error::Dimension(format!(
            "discrete Lyapunov with A {:?} and W {:?}",
            a.shape(),
            w.shape()
        )));
    }
    let mut x = w.clone();
    let mut ak = a.clone();
    let mut tmp = Mat::zeros(n, n);
    let mut incr = Mat::zeros(n, n);
    for it in 0..LYAP_MAX_DOUBLINGS {
        tmp.gemm(1.0, &ak, &x, 0.0);
        incr.gemm(1.0, &tmp, &ak.transpose(), 0.0);
        x += &incr;
        symmetrize(&mut x);
        let xn = x.norm();
        let inc = incr.norm();
        if !xn.is_finite() {
            return Err(Error::Unstable(format!(
                "discrete Lyapunov iteration diverged after {it} doublings"
            )));
        }
        if inc <= f64::EPSILON * 1e-2 * xn.max(f64::MIN_POSITIVE) || inc == 0.0 {
            return Ok(x);
        }
        tmp.gemm(1.0, &ak, &ak.clone(), 0.0);
        core::mem::swap(&mut ak, &mut tmp);
        if ak.norm() > 1e150 {
            return Err(Error::Unstable(
                "discrete Lyapunov operator has spectral radius ≥ 1".into(),
            ));
        }
    }
    Err(Error::NoConvergence {
        solver: "discrete Lyapunov doubling",
        iterations: LYAP_MAX_DOUBLINGS,
        residual: discrete_lyapunov_residual(a, w, &x),
    })
}

/// `‖A X Aᵀ + W − X‖ / max(‖X‖, ‖W‖)`.
pub fn discrete_lyapunov_residual(a: &Mat, w: &Mat, x: &Mat) -> f64 {
    let r = a * x * a.transpose() + w - x;
    r.norm() / x.norm().max(w.norm()).max(f64::MIN_POSITIVE)
}

/// Solve `F X + X Fᵀ + W = 0` for Hurwitz `F`.
///
/// Uses a Cayley transform to a discrete Lyapunov equation, solved by doubling.
pub fn solve_continuous_lyapunov(f: &Mat, w: &Mat) -> Result<Mat> {
    let n = f.nrows();
    if f.ncols() != n || w.shape() != (n, n) {
        return Err(Error::Dimension(format!(
            "continuous Lyapunov with F {:?} and W {:?}",
            f.shape(),
            w.shape()
        )));
    }
    if n == 0 {
        return Ok(Mat::zeros(0, 0));
    }
    let abscissa = spectral_abscissa(f);
    if !(abscissa < 0.0) {
        return Err(Error::Unstable(format!(
            "feedback matrix is not Hurwitz (max Re λ = {abscissa:e})"
        )));
    }
    // Cayley parameter: match the eigenvalue scale of F.
    let eigs = f.clone().complex_eigenvalues();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for z in eigs.iter() {
        let r = z.re.hypot(z.im);
        lo = lo.min(r);
        hi = hi.max(r);
    }
    let step = 1.0 / (lo * hi).sqrt().max(f64::MIN_POSITIVE);
    let m = Mat::identity(n, n) - f * step;
    let lu = m.clone().lu();
    let ad = lu
        .solve(&(Mat::identity(n, n) + f * step))
        .ok_or(Error::Conditioning("Cayley transform of F"))?;
    let tmp = lu
        .solve(&(w * (2.0 * step)))
        .ok_or(Error::Conditioning("Cayley transform of F"))?;
    let wd = lu
        .solve(&tmp.transpose())
        .ok_or(Error::Conditioning("Cayley transform of F"))?;
    let wd = symmetrized(wd.transpose());
    let mut x = solve_discrete_lyapunov(&ad, &wd)?;
    symmetrize(&mut x);
    Ok(x)
}

/// `‖F X + X Fᵀ + W‖ / max(‖W‖, tiny)`.
pub fn continuous_lyapunov_residual(f: &Mat, w: &Mat, x: &Mat) -> f64 {
    let r = f * x + x * f.transpose() + w;
    r.norm() / w.norm().max(f64::MIN_POSITIVE)
}
