//! Matrix exponential by scaling and squaring with diagonal Padé approximants
//! (degrees 3, 5, 7, 9, 13), following Higham (2005).

#[allow(unused_imports)]
use num_traits::Float;

use crate::Mat;

const THETA_3: f64 = 1.495_585_217_958_292e-2;
const THETA_5: f64 = 2.539_398_330_063_23e-1;
const THETA_7: f64 = 9.504_178_996_162_932e-1;
const THETA_9: f64 = 2.097_847_961_257_068;
const THETA_13: f64 = 5.371_920_351_148_152;

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [
    17_297_280.0,
    8_648_640.0,
    1_995_840.0,
    277_200.0,
    25_200.0,
    1_512.0,
    56.0,
    1.0,
];
const B9: [f64; 10] = [
    17_643_225_600.0,
    8_821_612_800.0,
    2_075_673_600.0,
    302_702_400.0,
    30_270_240.0,
    2_162_160.0,
    110_880.0,
    3_960.0,
    90.0,
    1.0,
];
const B13: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16_380.0,
    182.0,
    1.0,
];

fn norm1(a: &Mat) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Padé numerator/denominator pieces `U` (odd) and `V` (even) for the low
/// degrees, from precomputed even powers `A², A⁴, …`.
fn pade_low(a: &Mat, b: &[f64], powers: &[Mat]) -> (Mat, Mat) {
    let n = a.nrows();
    let mut u = Mat::identity(n, n) * b[1];
    let mut v = Mat::identity(n, n) * b[0];
    for (k, p) in powers.iter().enumerate() {
        u += p * b[2 * k + 3];
        v += p * b[2 * k + 2];
    }
    (a * u, v)
}

fn solve_pade(u: &Mat, v: &Mat) -> Mat {
    let p = v + u;
    let q = v - u;
    // q is well conditioned for ‖A‖ ≤ θ; fall back to a full-pivot solve anyway.
    match q.clone().lu().solve(&p) {
        Some(r) => r,
        None => q.full_piv_lu().solve(&p).expect("Padé denominator is singular"),
    }
}

/// `exp(a)` for a square matrix.
pub fn expm(a: &Mat) -> Mat {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "expm needs a square matrix");
    if n == 0 {
        return Mat::zeros(0, 0);
    }
    let norm = norm1(a);
    if !norm.is_finite() {
        return Mat::from_element(n, n, f64::NAN);
    }

    let a2 = a * a;
    if norm <= THETA_3 {
        let (u, v) = pade_low(a, &B3, core::slice::from_ref(&a2));
        return solve_pade(&u, &v);
    }
    let a4 = &a2 * &a2;
    if norm <= THETA_5 {
        let (u, v) = pade_low(a, &B5, &[a2, a4]);
        return solve_pade(&u, &v);
    }
    let a6 = &a4 * &a2;
    if norm <= THETA_7 {
        let (u, v) = pade_low(a, &B7, &[a2, a4, a6]);
        return solve_pade(&u, &v);
    }
    if norm <= THETA_9 {
        let a8 = &a6 * &a2;
        let (u, v) = pade_low(a, &B9, &[a2, a4, a6, a8]);
        return solve_pade(&u, &v);
    }

    let s = (norm / THETA_13).log2().ceil().max(0.0) as i32;
    let scale = 2f64.powi(-s);
    let a1 = a * scale;
    let a2 = a2 * (scale * scale);
    let a4 = a4 * scale.powi(4);
    let a6 = a6 * scale.powi(6);
    let b = &B13;
    let id = Mat::identity(n, n);

    let inner_u = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9]);
    let u = &a1 * (inner_u + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &id * b[1]);
    let inner_v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8]);
    let v = inner_v + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &id * b[0];

    let mut r = solve_pade(&u, &v);
    for _ in 0..s {
        r = &r * &r;
    }
    r
}

/// `exp(F·dt)` together with its directional derivative along `dF`:
/// the top-right block of `exp([[F, dF], [0, F]]·dt)`.
pub fn expm_with_derivative(f: &Mat, df: &Mat, dt: f64) -> (Mat, Mat) {
    let n = f.nrows();
    let mut big = Mat::zeros(2 * n, 2 * n);
    big.view_mut((0, 0), (n, n)).copy_from(&(f * dt));
    big.view_mut((0, n), (n, n)).copy_from(&(df * dt));
    big.view_mut((n, n), (n, n)).copy_from(&(f * dt));
    let e = expm(&big);
    (
        e.view((0, 0), (n, n)).into_owned(),
        e.view((0, n), (n, n)).into_owned(),
    )
}
