//! Standard normal density, distribution function and quantile.

use libm::erfc;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

pub fn pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

pub fn cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// `2 Φ(c) − 1`, accurate for large `c` as well.
pub fn central_mass(c: f64) -> f64 {
    1.0 - erfc(c * FRAC_1_SQRT_2)
}

// Acklam's rational approximation, absolute error below 1.2e-9 on (0, 1).
const A: [f64; 6] = [
    -3.969_683_028_665_376e1,
    2.209_460_984_245_205e2,
    -2.759_285_104_469_687e2,
    1.383_577_518_672_69e2,
    -3.066_479_806_614_716e1,
    2.506_628_277_459_239,
];
const B: [f64; 5] = [
    -5.447_609_879_822_406e1,
    1.615_858_368_580_409e2,
    -1.556_989_798_598_866e2,
    6.680_131_188_771_972e1,
    -1.328_068_155_288_572e1,
];
const C: [f64; 6] = [
    -7.784_894_002_430_293e-3,
    -3.223_964_580_411_365e-1,
    -2.400_758_277_161_838,
    -2.549_732_539_343_734,
    4.374_664_141_464_968,
    2.938_163_982_698_783,
];
const D: [f64; 4] = [
    7.784_695_709_041_462e-3,
    3.224_671_290_700_398e-1,
    2.445_134_137_142_996,
    3.754_408_661_907_416,
];
const P_LOW: f64 = 0.02425;

fn acklam(p: f64) -> f64 {
    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    }
}

/// Standard normal quantile Φ⁻¹(p) for `p` in the open unit interval.
///
/// Rational approximation on the lower half followed by one Newton step on
/// Φ; the upper half is obtained by symmetry, which keeps `1 − p` exact.
pub fn quantile(p: f64) -> f64 {
    debug_assert!(p > 0.0 && p < 1.0, "quantile argument {p} outside (0, 1)");
    if p > 0.5 {
        return -quantile(1.0 - p);
    }
    let x = acklam(p);
    let err = cdf(x) - p;
    let density = pdf(x);
    if density > 0.0 {
        x - err / density
    } else {
        x
    }
}

/// `E|N|^γ` for a standard normal `N`.
pub fn abs_moment(gamma: f64) -> f64 {
    use statrs::function::gamma::ln_gamma;
    (0.5 * gamma * 2f64.ln() + ln_gamma(0.5 * (gamma + 1.0)) - 0.5 * PI.ln()).exp()
}
