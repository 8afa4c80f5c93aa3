//! Short-packet transmission over a SIMO Rayleigh fading link.
//!
//! The combined small-scale gain `g` of `N_r` receive antennas is
//! Erlang(`N_r`, 1) distributed. Each copy of a packet carries `b` bits in
//! `m = η·D^τ·T_s·B` channel symbols and fails with the normal-approximation
//! error at SNR `γ = a·g·P/(ϑ·N₀·B)`.

use crate::error::{Error, Result};
use crate::specfun::{fading_expectation, q_function, q_inverse, Probability};
use std::f64::consts::{LN_2, PI};

/// Smallest blocklength for which the normal approximation is trusted.
pub const MIN_BLOCKLENGTH: f64 = 50.0;
/// Largest spectral efficiency (bits per symbol) accepted for a copy.
pub const MAX_BITS_PER_SYMBOL: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkModel {
    /// Hz.
    pub bandwidth: f64,
    /// Watts.
    pub tx_power: f64,
    /// Watts per Hz.
    pub noise_psd: f64,
    /// Linear large-scale gain `a ≤ 1`.
    pub large_scale_gain: f64,
    /// Linear SNR loss `ϑ ≥ 1` from imperfect channel knowledge.
    pub snr_loss: f64,
    pub n_antennas: u32,
    /// Fraction `η` of the copy's resources carrying data.
    pub data_fraction: f64,
    pub payload_bits: u32,
    /// Seconds.
    pub slot_duration: f64,
    /// Slots per copy (`D^τ`).
    pub copy_duration: u32,
}

impl LinkModel {
    /// Checks every field's range. The blocklength limits are separate, see
    /// [`LinkModel::check_blocklength`], because the optimizer probes
    /// bandwidths where they do not hold.
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::domain(
                    "link_model",
                    format!("{name} = {v} must be positive"),
                ))
            }
        };
        positive("bandwidth", self.bandwidth)?;
        positive("tx_power", self.tx_power)?;
        positive("noise_psd", self.noise_psd)?;
        positive("large_scale_gain", self.large_scale_gain)?;
        positive("slot_duration", self.slot_duration)?;
        if self.large_scale_gain > 1.0 {
            return Err(Error::domain(
                "link_model",
                "large-scale gain must not exceed 1",
            ));
        }
        if !(self.snr_loss >= 1.0 && self.snr_loss.is_finite()) {
            return Err(Error::domain("link_model", "SNR loss must be at least 1"));
        }
        if !(self.data_fraction > 0.0 && self.data_fraction <= 1.0) {
            return Err(Error::domain(
                "link_model",
                "data fraction must lie in (0, 1]",
            ));
        }
        if self.n_antennas == 0 || self.copy_duration == 0 {
            return Err(Error::domain(
                "link_model",
                "antenna count and copy duration must be positive",
            ));
        }
        Ok(())
    }

    pub fn with_bandwidth(mut self, bandwidth: f64) -> Self {
        self.bandwidth = bandwidth;
        self
    }

    pub fn with_gain(mut self, large_scale_gain: f64) -> Self {
        self.large_scale_gain = large_scale_gain;
        self
    }

    /// Symbols per copy, `m = η·D^τ·T_s·B`.
    pub fn blocklength(&self) -> f64 {
        self.data_fraction * f64::from(self.copy_duration) * self.slot_duration * self.bandwidth
    }

    /// Coding rate `r = b/m` in bits per symbol.
    pub fn coding_rate(&self) -> f64 {
        f64::from(self.payload_bits) / self.blocklength()
    }

    /// SNR per unit small-scale gain, `a·P/(ϑ·N₀·B)`.
    pub fn snr_per_unit_gain(&self) -> f64 {
        self.large_scale_gain * self.tx_power / (self.snr_loss * self.noise_psd * self.bandwidth)
    }

    pub fn check_blocklength(&self) -> Result<()> {
        let m = self.blocklength();
        if m < MIN_BLOCKLENGTH {
            return Err(Error::domain(
                "blocklength",
                format!("{m:.1} symbols per copy is below the minimum of {MIN_BLOCKLENGTH}"),
            ));
        }
        if self.coding_rate() > MAX_BITS_PER_SYMBOL {
            return Err(Error::domain(
                "blocklength",
                format!(
                    "{m:.1} symbols cannot carry {} bits at {MAX_BITS_PER_SYMBOL} bits/symbol",
                    self.payload_bits
                ),
            ));
        }
        Ok(())
    }
}

/// Distance-dependent path loss with log-normal shadowing, in dB.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathLossModel {
    pub fixed_loss_db: f64,
    pub distance_exponent_db: f64,
    pub shadowing_std_db: f64,
    pub availability_target: Probability,
}

impl Default for PathLossModel {
    fn default() -> Self {
        PathLossModel {
            fixed_loss_db: 35.3,
            distance_exponent_db: 37.6,
            shadowing_std_db: 8.0,
            availability_target: Probability::new(1e-5).expect("constant in range"),
        }
    }
}

impl PathLossModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.fixed_loss_db > 0.0
            && self.distance_exponent_db > 0.0
            && self.shadowing_std_db > 0.0)
        {
            return Err(Error::domain(
                "path_loss_model",
                "all dB parameters must be positive",
            ));
        }
        let t = self.availability_target.value();
        if !(t > 0.0 && t <= 0.5) {
            return Err(Error::domain(
                "path_loss_model",
                "availability target must lie in (0, 0.5]",
            ));
        }
        Ok(())
    }

    /// Mean path loss in dB at `distance` meters.
    pub fn mean_loss_db(&self, distance: f64) -> f64 {
        self.fixed_loss_db + self.distance_exponent_db * distance.log10()
    }

    /// Linear gain for a given shadowing realization (dB, positive values
    /// increase the gain).
    pub fn gain(&self, distance: f64, shadowing_db: f64) -> f64 {
        10f64.powf((shadowing_db - self.mean_loss_db(distance)) / 10.0)
    }

    /// Shadowing value whose lower tail has mass `availability_target`.
    pub fn worst_case_shadowing_db(&self) -> Result<f64> {
        Ok(-self.shadowing_std_db * q_inverse(self.availability_target)?)
    }
}

/// Large-scale gain exceeded with probability `1 − availability_target` at
/// `distance` meters.
pub fn worst_case_gain(model: &PathLossModel, distance: f64) -> Result<f64> {
    if !(distance >= 1.0) {
        return Err(Error::domain(
            "worst_case_gain",
            format!("distance {distance} m must be at least 1 m"),
        ));
    }
    let t = model.availability_target.value();
    let shadow = if t == 0.5 {
        0.0
    } else {
        model.worst_case_shadowing_db()?
    };
    Ok(model.gain(distance, shadow))
}

/// Decoding error of one copy given the small-scale gain `g`.
pub fn conditional_decoding_error(link: &LinkModel, gain_sample: f64) -> Probability {
    let gamma = link.snr_per_unit_gain() * gain_sample;
    if !(gamma > 0.0) {
        return Probability::ONE;
    }
    let m = link.blocklength();
    // V = 1 − (1+γ)^{−2} written without cancellation for small γ.
    let dispersion = gamma * (2.0 + gamma) / ((1.0 + gamma) * (1.0 + gamma));
    let margin = gamma.ln_1p() - f64::from(link.payload_bits) * LN_2 / m;
    Probability::saturating(q_function((m / dispersion).sqrt() * margin))
}

/// Decoding error of one copy averaged over Rayleigh fading by quadrature.
pub fn expected_decoding_error(link: &LinkModel) -> Result<Probability> {
    link.validate()?;
    link.check_blocklength()?;
    let v = fading_expectation(
        |g| conditional_decoding_error(link, g).value(),
        link.n_antennas,
    )?;
    Ok(Probability::saturating(v))
}

/// Intermediate quantities of the closed-form fading average.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApproxTerms {
    pub coding_rate: f64,
    /// Slope `ω` of the linearized error around the SNR threshold.
    pub omega: f64,
    /// SNR threshold `θ = 2^r − 1`.
    pub theta: f64,
    pub xi: f64,
    pub zeta: f64,
    pub g_upper: f64,
    pub g_lower: f64,
    /// `ω·a·P·√m/(ϑ·N₀·B)`.
    pub prefactor: f64,
    /// Unclamped value of the approximation.
    pub raw: f64,
}

/// `E[(x − g)⁺]` for `g ~ Erlang(n, 1)`, equal to `Σ_{i>n} (i − n)·p_i(x)`
/// with `p_i` the Poisson(`x`) pmf; evaluated as `x − n + Σ_{i≤n} (n − i)·p_i(x)`
/// once `x ≥ n` where that finite sum is all-positive.
fn erlang_shortfall(n: u32, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let nf = f64::from(n);
    let ln_fact = |k: u32| -> f64 { (2..=k).map(|j| f64::from(j).ln()).sum() };
    if x < nf {
        let mut i = n + 1;
        let mut p = (f64::from(i) * x.ln() - x - ln_fact(i)).exp();
        let mut sum = 0.0;
        loop {
            let term = (f64::from(i) - nf) * p;
            sum += term;
            if term <= 1e-18 * sum || p == 0.0 {
                break;
            }
            i += 1;
            p *= x / f64::from(i);
        }
        sum
    } else {
        let mut p = (nf * x.ln() - x - ln_fact(n)).exp();
        let mut sum = 0.0;
        for i in (0..n).rev() {
            p *= f64::from(i + 1) / x;
            sum += (nf - f64::from(i)) * p;
        }
        x - nf + sum
    }
}

/// Evaluates the closed-form approximation and its ingredients.
///
/// The error is linearized in the SNR around `θ`: one below
/// `g^L = θ⁻/c`, zero above `g^U = θ⁺/c`, linear in between. Its fading
/// average is `prefactor·[(g^U − g^L) − Σ_{i=0}^{N_r} (N_r − i)·A_i]`, which
/// is computed as `prefactor·[H(g^U) − H(g^L)]` with `H` from
/// [`erlang_shortfall`] to avoid cancelling Poisson sums.
pub fn approx_terms(link: &LinkModel) -> Result<ApproxTerms> {
    link.validate()?;
    link.check_blocklength()?;
    let m = link.blocklength();
    let r = link.coding_rate();
    let omega = 1.0 / (2.0 * PI * (4f64.powf(r) - 1.0)).sqrt();
    let theta = r.exp2() - 1.0;
    let half_width = 1.0 / (2.0 * omega * m.sqrt());
    let xi = theta + half_width;
    let zeta = theta - half_width;
    if !(zeta > 0.0) {
        return Err(Error::domain(
            "expected_decoding_error_approx",
            format!("lower SNR limit ζ = {zeta:.4} is not positive at blocklength {m:.1}"),
        ));
    }
    let c = link.snr_per_unit_gain();
    let g_upper = xi / c;
    let g_lower = zeta / c;
    let prefactor = omega * c * m.sqrt();
    let n = link.n_antennas;
    let raw = prefactor * (erlang_shortfall(n, g_upper) - erlang_shortfall(n, g_lower));
    Ok(ApproxTerms {
        coding_rate: r,
        omega,
        theta,
        xi,
        zeta,
        g_upper,
        g_lower,
        prefactor,
        raw,
    })
}

/// Closed-form approximation of [`expected_decoding_error`], clamped to
/// `[0, 1]`.
pub fn expected_decoding_error_approx(link: &LinkModel) -> Result<Probability> {
    let terms = approx_terms(link)?;
    if terms.raw > 1.0 {
        log::debug!("closed-form decoding error {:.4} clamped to 1", terms.raw);
    }
    Ok(Probability::saturating(terms.raw))
}

/// Loss probability after `k` independent copies.
pub fn repetition_loss(per_copy_error: Probability, k: u32) -> Result<Probability> {
    if k == 0 {
        return Err(Error::domain(
            "repetition_loss",
            "at least one copy is required",
        ));
    }
    Ok(Probability::saturating(
        per_copy_error.value().powi(k as i32),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::erlang_expectation_adaptive;
    use approx::assert_relative_eq;

    fn dbm(v: f64) -> f64 {
        10f64.powf(v / 10.0) * 1e-3
    }

    fn reference_link(bandwidth: f64, n_antennas: u32) -> LinkModel {
        LinkModel {
            bandwidth,
            tx_power: dbm(23.0),
            noise_psd: dbm(-174.0),
            large_scale_gain: worst_case_gain(&PathLossModel::default(), 200.0).unwrap(),
            snr_loss: 1.0,
            n_antennas,
            data_fraction: 1.0,
            payload_bits: 160,
            slot_duration: 1e-4,
            copy_duration: 5,
        }
    }

    #[test]
    fn worst_case_gain_at_200m() {
        let m = PathLossModel::default();
        let loss = m.mean_loss_db(200.0);
        assert_relative_eq!(loss, 35.3 + 37.6 * 200f64.log10(), max_relative = 1e-15);
        assert!((loss - 121.82).abs() < 0.01);
        let s = m.worst_case_shadowing_db().unwrap();
        assert!((s + 34.1).abs() < 0.05, "{s}");
        let a = worst_case_gain(&m, 200.0).unwrap();
        assert!((a.log10() + 15.592).abs() < 0.002, "{}", a.log10());
        assert!(a < worst_case_gain(&m, 50.0).unwrap());
        let median = PathLossModel {
            availability_target: Probability::new(0.5).unwrap(),
            ..m
        };
        assert_relative_eq!(
            worst_case_gain(&median, 200.0).unwrap(),
            10f64.powf(-loss / 10.0),
            max_relative = 1e-14
        );
        assert!(worst_case_gain(&m, 0.5).is_err());
    }

    #[test]
    fn conditional_error_limits() {
        let link = reference_link(440e3, 32);
        assert_eq!(conditional_decoding_error(&link, 0.0), Probability::ONE);
        // Rate-matching gain: ln(1+γ) = b ln2/m.
        let gamma = (f64::from(link.payload_bits) * LN_2 / link.blocklength()).exp_m1();
        let g = gamma / link.snr_per_unit_gain();
        assert_relative_eq!(
            conditional_decoding_error(&link, g).value(),
            0.5,
            max_relative = 1e-9
        );
        let mut prev = 1.0;
        for i in 1..400 {
            let e = conditional_decoding_error(&link, f64::from(i) * 0.5).value();
            assert!(e <= prev);
            assert!((0.0..=1.0).contains(&e));
            prev = e;
        }
    }

    #[test]
    fn expected_error_is_interior_and_matches_adaptive() {
        let link = reference_link(440e3, 32);
        let e = expected_decoding_error(&link).unwrap().value();
        assert!(e > 0.0 && e < 1.0);
        let adaptive = erlang_expectation_adaptive(
            |g| conditional_decoding_error(&link, g).value(),
            32,
            1e-12,
            0.0,
        )
        .unwrap();
        assert!((e - adaptive).abs() < 1e-8, "{e} vs {adaptive}");
    }

    #[test]
    fn more_antennas_lower_error() {
        let mut prev = 1.0;
        for n in [1, 2, 4, 8, 16, 32, 64] {
            let e = expected_decoding_error(&reference_link(440e3, n))
                .unwrap()
                .value();
            assert!(e < prev, "N={n}");
            prev = e;
        }
    }

    #[test]
    fn approx_identities() {
        let link = reference_link(440e3, 32);
        let t = approx_terms(&link).unwrap();
        let c = link.snr_per_unit_gain();
        assert_relative_eq!(
            t.g_upper - t.g_lower,
            1.0 / (c * t.omega * link.blocklength().sqrt()),
            max_relative = 1e-12
        );
        assert_relative_eq!(
            t.prefactor * (t.g_upper - t.g_lower),
            1.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn approx_matches_literal_poisson_sum() {
        // Small antenna count keeps the literal alternating sum well conditioned.
        let link = reference_link(440e3, 4).with_gain(1e-14);
        let t = approx_terms(&link).unwrap();
        let n = link.n_antennas;
        let pmf = |x: f64, i: u32| {
            let f: f64 = (1..=i).map(f64::from).product();
            x.powi(i as i32) * (-x).exp() / f
        };
        let sum: f64 = (0..=n)
            .map(|i| f64::from(n - i) * (pmf(t.g_lower, i) - pmf(t.g_upper, i)))
            .sum();
        let literal = t.prefactor * ((t.g_upper - t.g_lower) - sum);
        assert_relative_eq!(t.raw, literal, max_relative = 1e-9);
    }

    #[test]
    fn approx_decreases_with_power() {
        let base = reference_link(440e3, 32);
        let mut prev = 1.0;
        for step in 0..=10 {
            let link = LinkModel {
                tx_power: base.tx_power * 10f64.powf(f64::from(step) / 10.0),
                ..base
            };
            let e = expected_decoding_error_approx(&link).unwrap().value();
            assert!(e < prev || e == 0.0);
            prev = e;
        }
    }

    #[test]
    fn approx_rejects_short_blocks() {
        let link = reference_link(20e3, 32);
        assert!(approx_terms(&link).is_err());
    }

    #[test]
    fn repetition() {
        let e = Probability::new(0.1).unwrap();
        assert_eq!(repetition_loss(e, 1).unwrap(), e);
        assert_relative_eq!(
            repetition_loss(e, 3).unwrap().value(),
            1e-3,
            max_relative = 1e-15
        );
        assert!(repetition_loss(e, 0).is_err());
    }

    #[test]
    fn shortfall_matches_direct_integral() {
        for &(n, x) in &[(4u32, 1.0), (4, 9.0), (32, 20.0), (32, 45.0)] {
            let oracle = erlang_expectation_adaptive(|g| (x - g).max(0.0), n, 1e-13, 0.0).unwrap();
            assert_relative_eq!(erlang_shortfall(n, x), oracle, max_relative = 1e-8);
        }
    }
}
