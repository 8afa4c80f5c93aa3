//! Lower real branch of the Lambert W function.

use crate::error::{Error, Result};
use std::f64::consts::E;

const BRANCH_POINT: f64 = -1.0 / E;
const MAX_ITER: usize = 100;

/// `x − ln(1 + x)` without cancellation near zero. Requires `x > −1`.
pub fn x_minus_ln_1p(x: f64) -> f64 {
    if x.abs() < 1e-2 {
        // x²/2 − x³/3 + x⁴/4 − … ; ten terms reach 1e-20 relative at |x| = 0.01.
        let mut term = x * x;
        let mut sum = 0.0;
        for k in 2..=12 {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            sum += sign * term / k as f64;
            term *= x;
        }
        sum
    } else {
        x - x.ln_1p()
    }
}

/// `W₋₁(x)`: the solution `w ≤ −1` of `w·eʷ = x` for `−1/e ≤ x < 0`.
///
/// Halley iteration from the branch-point series (near `−1/e`) or the
/// logarithmic asymptote (near `0⁻`), kept inside a shrinking bracket with a
/// bisection fallback.
pub fn lambert_w_m1(x: f64) -> Result<f64> {
    if !(x.is_finite() && x < 0.0) {
        return Err(Error::domain(
            "lambert_w_m1",
            format!("argument {x} is outside [-1/e, 0)"),
        ));
    }
    // Allow a couple of ulps of slack so that a rounded −1/e maps to −1.
    let rel = (x - BRANCH_POINT) / BRANCH_POINT.abs();
    if rel < -4.0 * f64::EPSILON {
        return Err(Error::domain(
            "lambert_w_m1",
            format!("argument {x} is below the branch point -1/e"),
        ));
    }
    if rel <= 4.0 * f64::EPSILON {
        return Ok(-1.0);
    }

    let mut w = if x < -0.25 {
        let p = -(2.0 * (1.0 + E * x)).max(0.0).sqrt();
        -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p
    } else {
        let l1 = (-x).ln();
        let l2 = (-l1).ln();
        l1 - l2 + l2 / l1
    };

    // f(w) = w·eʷ − x is decreasing on (−∞, −1]: positive left of the root.
    let u = -(-x).ln() - 1.0;
    let mut lo = -1.0 - (2.0 * u).sqrt() - u - 1.0;
    let mut hi = -1.0;
    if !(lo..=hi).contains(&w) {
        w = 0.5 * (lo + hi);
    }

    for _ in 0..MAX_ITER {
        let ew = w.exp();
        let f = w * ew - x;
        if f > 0.0 {
            lo = w;
        } else {
            hi = w;
        }
        let wp1 = w + 1.0;
        let denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
        let mut next = w - f / denom;
        if !next.is_finite() || next <= lo || next >= hi {
            next = 0.5 * (lo + hi);
        }
        let done = (next - w).abs() <= 4.0 * f64::EPSILON * w.abs();
        w = next;
        if done || hi - lo <= 2.0 * f64::EPSILON * lo.abs() {
            break;
        }
    }
    Ok(w)
}

/// `W₋₁(−u·e⁻ᵘ)` for `0 < u ≤ 1`.
///
/// `−u` is the principal-branch root of this argument; the value returned is
/// the other real root `−v` with `v ≥ 1`. It is found from
/// `(v−1) − ln v = (u−1) − ln u` in the excess `s = v − 1`, which stays
/// well conditioned as `u → 1` where the direct route loses half its digits.
pub fn lambert_w_m1_conjugate(u: f64) -> Result<f64> {
    Ok(-1.0 - conjugate_excess(u)?)
}

/// The excess `s = −W₋₁(−u·e⁻ᵘ) − 1 ≥ 0`.
pub(crate) fn conjugate_excess(u: f64) -> Result<f64> {
    if !(u > 0.0 && u <= 1.0) {
        return Err(Error::domain(
            "lambert_w_m1_conjugate",
            format!("u = {u} is outside (0, 1]"),
        ));
    }
    let c = if u < 0.5 {
        (u - 1.0) - u.ln()
    } else {
        x_minus_ln_1p(u - 1.0)
    };
    if c == 0.0 {
        return Ok(0.0);
    }
    // h(s) = s − ln(1+s) − c is increasing and convex for s > 0.
    let h = |s: f64| x_minus_ln_1p(s) - c;
    let mut lo = 0.0;
    let mut hi = (2.0 * c).sqrt() + c + 1.0;
    while h(hi) < 0.0 {
        hi *= 2.0;
    }
    let mut s = if c < 1.0 {
        (2.0 * c).sqrt() + 2.0 * c / 3.0
    } else {
        c + (1.0 + c).ln()
    };
    if !(s > lo && s < hi) {
        s = 0.5 * (lo + hi);
    }
    for _ in 0..MAX_ITER {
        let hs = h(s);
        if hs > 0.0 {
            hi = s;
        } else {
            lo = s;
        }
        let slope = s / (1.0 + s);
        let mut next = s - hs / slope;
        if !next.is_finite() || next <= lo || next >= hi {
            next = 0.5 * (lo + hi);
        }
        let done = (next - s).abs() <= 2.0 * f64::EPSILON * s;
        s = next;
        if done || hi - lo <= 2.0 * f64::EPSILON * hi {
            break;
        }
    }
    Ok(s)
}
