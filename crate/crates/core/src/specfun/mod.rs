//! Special functions and quadrature shared by the model modules.
//!
//! Everything here is a pure function of its arguments. The normal tail is
//! evaluated through `erfc` so probabilities far below `1e-8` keep their
//! relative accuracy, which the reliability targets of the optimizer need.

mod lambert;
mod normal;
mod quadrature;

pub use lambert::{lambert_w_m1, lambert_w_m1_conjugate, x_minus_ln_1p};
pub use normal::{q_function, q_inverse, std_normal_cdf};
pub use quadrature::{
    erlang_expectation_adaptive, fading_expectation, gauss_kronrod_15, GaussLaguerre,
    GAUSS_LAGUERRE_NODES,
};

use crate::error::{Error, Result};
use std::fmt;

/// A probability in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct Probability(f64);

impl Probability {
    pub const ZERO: Probability = Probability(0.0);
    pub const ONE: Probability = Probability(1.0);

    pub fn new(value: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&value) {
            Ok(Probability(value))
        } else {
            Err(Error::domain(
                "probability",
                format!("{value} is outside [0, 1]"),
            ))
        }
    }

    /// Clamps into `[0, 1]`; NaN maps to 1 so a broken evaluation never
    /// looks reliable.
    pub fn saturating(value: f64) -> Self {
        if value.is_nan() {
            Probability(1.0)
        } else {
            Probability(value.clamp(0.0, 1.0))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    /// Whether the value lies strictly inside `(0, 1)`.
    pub fn is_interior(self) -> bool {
        self.0 > 0.0 && self.0 < 1.0
    }
}

impl fmt::Display for Probability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:e}", self.0)
    }
}

impl TryFrom<f64> for Probability {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        Probability::new(value)
    }
}

impl From<Probability> for f64 {
    fn from(p: Probability) -> f64 {
        p.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn probability_rejects_out_of_range() {
        assert!(Probability::new(-1e-300).is_err());
        assert!(Probability::new(1.0 + f64::EPSILON).is_err());
        assert!(Probability::new(f64::NAN).is_err());
        assert_eq!(Probability::new(0.25).unwrap().value(), 0.25);
        assert_eq!(Probability::saturating(f64::NAN), Probability::ONE);
        assert_eq!(Probability::saturating(3.0), Probability::ONE);
    }
}
