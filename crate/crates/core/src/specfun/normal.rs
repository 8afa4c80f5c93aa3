use super::Probability;
use crate::error::{Error, Result};
use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// Standard normal CDF ψ(x).
///
/// Evaluated as `erfc(-x/√2)/2`, which keeps full relative accuracy in the
/// lower tail down to the underflow limit.
pub fn std_normal_cdf(x: f64) -> Result<Probability> {
    if !x.is_finite() {
        return Err(Error::domain(
            "std_normal_cdf",
            format!("non-finite input {x}"),
        ));
    }
    Ok(Probability::saturating(
        0.5 * libm::erfc(-x * FRAC_1_SQRT_2),
    ))
}

/// Gaussian Q-function `Q(x) = 1 − ψ(x)`. Infinite arguments map to the
/// limits; NaN propagates.
#[inline]
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

// Rational approximation of the normal quantile (P. J. Acklam), relative
// error about 1e-9; polished afterwards by Halley steps on the erfc form.
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
    -2.549_671_010_446_502,
    4.374_664_141_464_968,
    2.938_163_982_698_783,
];
const D: [f64; 4] = [
    7.784_695_709_041_462e-3,
    3.224_671_290_700_398e-1,
    2.445_134_137_142_996,
    3.754_408_661_907_416,
];

/// Quantile of the lower tail: `z ≤ 0` with `ψ(z) = p`, for `0 < p ≤ 0.5`.
fn lower_quantile(p: f64) -> f64 {
    debug_assert!(p > 0.0 && p <= 0.5);
    let mut z = if p < 0.024_25 {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    };
    for _ in 0..3 {
        let err = 0.5 * libm::erfc(-z * FRAC_1_SQRT_2) - p;
        let u = err * (2.0 * PI).sqrt() * (0.5 * z * z).exp();
        let step = u / (1.0 + 0.5 * z * u);
        z -= step;
        if step.abs() <= 1e-16 * z.abs().max(1e-300) {
            break;
        }
    }
    z
}

/// Inverse of the Q-function: returns `x` with `Q(x) = p`.
pub fn q_inverse(p: Probability) -> Result<f64> {
    let p = p.value();
    if p <= 0.0 || p >= 1.0 {
        return Err(Error::domain(
            "q_inverse",
            format!("p = {p} has an infinite inverse"),
        ));
    }
    if p <= 0.5 {
        Ok(-lower_quantile(p))
    } else {
        // 1 - p is exact for p in [0.5, 1].
        Ok(lower_quantile(1.0 - p))
    }
}
