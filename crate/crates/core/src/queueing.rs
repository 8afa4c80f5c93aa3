//! Effective-bandwidth model of a device's transmit queue.
//!
//! Packets arrive as a Poisson process of rate `λ` per slot and are served
//! one at a time, each occupying the transmitter for `D^t` slots. All delays
//! are in slots and may be fractional.

use crate::error::{Error, Result};
use crate::specfun::{lambert_w_m1_conjugate, Probability};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrafficModel {
    arrival_rate: f64,
}

impl TrafficModel {
    pub fn new(arrival_rate: f64) -> Result<Self> {
        if !(arrival_rate > 0.0 && arrival_rate.is_finite()) {
            return Err(Error::domain(
                "traffic_model",
                format!("arrival rate {arrival_rate} must be positive"),
            ));
        }
        Ok(TrafficModel { arrival_rate })
    }

    pub fn arrival_rate(&self) -> f64 {
        self.arrival_rate
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueueOperatingPoint {
    pub queue_delay_bound: u32,
    pub service_interval: f64,
    pub violation_prob: Probability,
}

impl QueueOperatingPoint {
    pub fn evaluate(
        traffic: TrafficModel,
        queue_delay_bound: u32,
        service_interval: f64,
    ) -> Result<Self> {
        let violation_prob = delay_violation_prob(
            traffic.arrival_rate,
            f64::from(queue_delay_bound),
            service_interval,
        )?;
        Ok(QueueOperatingPoint {
            queue_delay_bound,
            service_interval,
            violation_prob,
        })
    }
}

fn check_rate(op: &'static str, arrival_rate: f64) -> Result<()> {
    if arrival_rate > 0.0 && arrival_rate.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(
            op,
            format!("arrival rate {arrival_rate} must be positive"),
        ))
    }
}

fn check_open_probability(op: &'static str, p: Probability) -> Result<f64> {
    if p.is_interior() {
        Ok(p.value())
    } else {
        Err(Error::domain(
            op,
            format!("violation probability {p} must lie in (0, 1)"),
        ))
    }
}

/// Minimal constant service rate (packets/slot) that keeps the queueing
/// delay above `queue_delay_bound` with probability at most `violation_prob`.
pub fn effective_bandwidth(
    arrival_rate: f64,
    queue_delay_bound: f64,
    violation_prob: Probability,
) -> Result<f64> {
    check_rate("effective_bandwidth", arrival_rate)?;
    let eps = check_open_probability("effective_bandwidth", violation_prob)?;
    if !(queue_delay_bound > 0.0) {
        return Err(Error::domain(
            "effective_bandwidth",
            format!("delay bound {queue_delay_bound} must be positive"),
        ));
    }
    let l = -eps.ln();
    Ok(l / (queue_delay_bound * (l / (arrival_rate * queue_delay_bound)).ln_1p()))
}

/// Decay rate `φ < 0` of the violation probability in the delay bound:
/// `ε^q = exp(D^q·φ)` with `φ = W₋₁(−λD^t e^{−λD^t})/D^t + λ`.
///
/// The Lambert term is evaluated through its conjugate form, so `φ` keeps
/// full relative accuracy as the load `λD^t` approaches one.
pub fn violation_exponent(arrival_rate: f64, service_interval: f64) -> Result<f64> {
    check_rate("violation_exponent", arrival_rate)?;
    if !(service_interval > 0.0 && service_interval.is_finite()) {
        return Err(Error::domain(
            "violation_exponent",
            format!("service interval {service_interval} must be positive"),
        ));
    }
    let load = arrival_rate * service_interval;
    if load >= 1.0 {
        return Err(Error::domain(
            "violation_exponent",
            format!("queue is unstable: load λ·D^t = {load} ≥ 1"),
        ));
    }
    // W₋₁ = −1 − s, so λD^t + W₋₁ = −((1 − λD^t) + s) without cancellation.
    let s = -1.0 - lambert_w_m1_conjugate(load)?;
    Ok(-((1.0 - load) + s) / service_interval)
}

/// Probability that a packet waits longer than `queue_delay_bound` slots.
pub fn delay_violation_prob(
    arrival_rate: f64,
    queue_delay_bound: f64,
    service_interval: f64,
) -> Result<Probability> {
    if !(queue_delay_bound >= 0.0) {
        return Err(Error::domain(
            "delay_violation_prob",
            format!("delay bound {queue_delay_bound} must be non-negative"),
        ));
    }
    let phi = violation_exponent(arrival_rate, service_interval)?;
    Ok(Probability::saturating((queue_delay_bound * phi).exp()))
}

/// Smallest delay bound (real slots) reaching `violation_prob`.
pub fn required_queue_delay(
    arrival_rate: f64,
    service_interval: f64,
    violation_prob: Probability,
) -> Result<f64> {
    let eps = check_open_probability("required_queue_delay", violation_prob)?;
    let phi = violation_exponent(arrival_rate, service_interval)?;
    Ok(eps.ln() / phi)
}

/// Fraction of packets waiting (arrival to start of service) more than
/// `queue_delay_bound` slots in a first-come-first-served queue with
/// deterministic service time `service_interval`.
///
/// Each slot receives a Poisson number of packets placed uniformly inside
/// the slot. Packets arriving during the first `10·D^q` slots only warm the
/// queue up and are not counted.
pub fn simulate_queue(
    arrival_rate: f64,
    service_interval: f64,
    queue_delay_bound: f64,
    n_slots: u64,
    seed: u64,
) -> Result<Probability> {
    let (violations, packets) = simulate_counts(
        arrival_rate,
        service_interval,
        queue_delay_bound,
        n_slots,
        &mut ChaCha8Rng::seed_from_u64(seed),
    )?;
    ratio(violations, packets)
}

/// Pools `replications` independent runs of [`simulate_queue`], each of
/// `n_slots` slots on its own substream of `seed`. The result does not
/// depend on `workers`.
pub fn simulate_queue_replicated(
    arrival_rate: f64,
    service_interval: f64,
    queue_delay_bound: f64,
    n_slots: u64,
    replications: u64,
    seed: u64,
    workers: usize,
) -> Result<Probability> {
    if replications == 0 {
        return Err(Error::domain(
            "simulate_queue",
            "replications must be positive",
        ));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::domain("thread_pool", e.to_string()))?;
    let runs: Vec<Result<(u64, u64)>> = pool.install(|| {
        (0..replications as usize)
            .into_par_iter()
            .map(|r| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(r as u64);
                simulate_counts(
                    arrival_rate,
                    service_interval,
                    queue_delay_bound,
                    n_slots,
                    &mut rng,
                )
            })
            .collect()
    });
    let (mut violations, mut packets) = (0, 0);
    for run in runs {
        let (v, p) = run?;
        violations += v;
        packets += p;
    }
    ratio(violations, packets)
}

fn ratio(violations: u64, packets: u64) -> Result<Probability> {
    if packets == 0 {
        Ok(Probability::ZERO)
    } else {
        Probability::new(violations as f64 / packets as f64)
    }
}

fn simulate_counts<R: Rng>(
    arrival_rate: f64,
    service_interval: f64,
    queue_delay_bound: f64,
    n_slots: u64,
    rng: &mut R,
) -> Result<(u64, u64)> {
    check_rate("simulate_queue", arrival_rate)?;
    if !(service_interval > 0.0) || arrival_rate * service_interval >= 1.0 {
        return Err(Error::domain(
            "simulate_queue",
            format!(
                "queue is unstable or service interval invalid: λ·D^t = {}",
                arrival_rate * service_interval
            ),
        ));
    }
    if !(queue_delay_bound > 0.0) {
        return Err(Error::domain(
            "simulate_queue",
            "delay bound must be positive",
        ));
    }
    let warmup = (10.0 * queue_delay_bound).ceil() as u64;
    if n_slots < warmup {
        return Err(Error::domain(
            "simulate_queue",
            format!("{n_slots} slots do not cover the warm-up of {warmup} slots"),
        ));
    }
    let poisson =
        Poisson::new(arrival_rate).map_err(|e| Error::domain("simulate_queue", e.to_string()))?;
    let mut server_free = 0.0f64;
    let mut offsets = Vec::new();
    let (mut violations, mut packets) = (0u64, 0u64);
    for slot in 0..n_slots {
        let n = poisson.sample(rng) as usize;
        if n == 0 {
            continue;
        }
        offsets.clear();
        offsets.extend((0..n).map(|_| rng.random::<f64>()));
        offsets.sort_by(f64::total_cmp);
        for &u in &offsets {
            let arrival = slot as f64 + u;
            let start = server_free.max(arrival);
            server_free = start + service_interval;
            if slot >= warmup {
                packets += 1;
                violations += u64::from(start - arrival > queue_delay_bound);
            }
        }
    }
    Ok((violations, packets))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn p(v: f64) -> Probability {
        Probability::new(v).unwrap()
    }

    #[test]
    fn effective_bandwidth_reference() {
        let eb = effective_bandwidth(0.01, 100.0, p(1e-5)).unwrap();
        let l = 1e5f64.ln();
        let oracle = l / (100.0 * (l / 1.0 + 1.0).ln());
        assert_relative_eq!(eb, oracle, max_relative = 1e-14);
        assert_relative_eq!(eb, 0.045_563_946_244_269_09, max_relative = 1e-12);
        assert!(eb > 0.01);
    }

    #[test]
    fn effective_bandwidth_rejects_endpoints() {
        assert!(effective_bandwidth(0.01, 100.0, Probability::ZERO).is_err());
        assert!(effective_bandwidth(0.01, 100.0, Probability::ONE).is_err());
        assert!(effective_bandwidth(0.01, 0.0, p(0.1)).is_err());
    }

    #[test]
    fn effective_bandwidth_decreases_with_bound() {
        let mut prev = f64::INFINITY;
        for dq in 1..500 {
            let eb = effective_bandwidth(0.01, f64::from(dq), p(1e-5)).unwrap();
            assert!(eb <= prev);
            prev = eb;
        }
    }

    #[test]
    fn inverse_pair_round_trip() {
        let eb = effective_bandwidth(0.01, 100.0, p(1e-5)).unwrap();
        let eps = delay_violation_prob(0.01, 100.0, 1.0 / eb).unwrap();
        assert_relative_eq!(eps.value(), 1e-5, max_relative = 1e-9);
    }

    #[test]
    fn violation_tends_to_one_at_full_load() {
        let eps = delay_violation_prob(0.1, 50.0, 10.0 * (1.0 - 1e-12)).unwrap();
        assert!(eps.value() > 0.999_99);
        assert!(delay_violation_prob(0.1, 50.0, 10.0).is_err());
    }

    #[test]
    fn required_delay_inverts_violation() {
        for &(lambda, dt) in &[(0.01, 5.0), (0.05, 10.0), (0.3, 3.0)] {
            let dq = required_queue_delay(lambda, dt, p(1e-6)).unwrap();
            assert!(dq > 0.0);
            let eps = delay_violation_prob(lambda, dq, dt).unwrap();
            assert_relative_eq!(eps.value(), 1e-6, max_relative = 1e-9);
            let looser = required_queue_delay(lambda, dt, p(1e-4)).unwrap();
            assert!(looser < dq);
        }
    }

    #[test]
    fn required_delay_grows_with_service_interval() {
        // Finite-difference sign of ∂D^q/∂D^t on a grid.
        for &lambda in &[0.005, 0.01, 0.05, 0.1] {
            for k in 1..20 {
                let dt = k as f64 * 0.04 / lambda;
                let h = 1e-6 * dt;
                let lo = required_queue_delay(lambda, dt, p(1e-5)).unwrap();
                let hi = required_queue_delay(lambda, dt + h, p(1e-5)).unwrap();
                assert!(hi > lo, "λ={lambda} D^t={dt}");
            }
        }
    }

    #[test]
    fn branch_selection_value_below_minus_one() {
        for &(lambda, dt) in &[(0.01, 5.0), (0.2, 4.9), (0.001, 1.0)] {
            let phi = violation_exponent(lambda, dt).unwrap();
            let dq = 37.0;
            let ln_inv_eps = -dq * phi;
            let w = (ln_inv_eps + lambda * dq) / (-dq / dt);
            assert!(w <= -1.0);
        }
    }

    #[test]
    fn idle_queue_never_violates() {
        let v = simulate_queue(1e-6, 5.0, 10.0, 200_000, 3).unwrap();
        assert_eq!(v, Probability::ZERO);
    }

    #[test]
    fn simulation_rejects_unstable_queue() {
        assert!(simulate_queue(0.5, 2.0, 10.0, 1000, 1).is_err());
        assert!(simulate_queue(0.1, 2.0, 10.0, 50, 1).is_err());
    }

    #[test]
    fn replicated_simulation_is_worker_invariant() {
        let a = simulate_queue_replicated(0.1, 5.0, 20.0, 50_000, 6, 9, 1).unwrap();
        let b = simulate_queue_replicated(0.1, 5.0, 20.0, 50_000, 6, 9, 8).unwrap();
        assert_eq!(a.value().to_bits(), b.value().to_bits());
    }
}
