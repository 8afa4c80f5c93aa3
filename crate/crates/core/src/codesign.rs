//! Joint choice of prediction horizon, delay split, repetition count and
//! bandwidth for one device, and the multi-device capacity built on it.
//!
//! All delays are integer slots. For a horizon `T` the communication budget
//! is `D_max + T − D^r`, shared by the queueing delay `D^q`, the
//! transmission delay `D^t = K·D^τ` and the decoding delay
//! `D^d = ⌈κ·D^t⌉`. The overall error is `ε^p + ε^q + ε^t`.

use crate::error::{Error, Infeasibility, Result};
use crate::phy::{expected_decoding_error_approx, LinkModel, PathLossModel};
use crate::prediction::{prediction_error_table, StateModel};
use crate::queueing::{violation_exponent, TrafficModel};
use crate::specfun::Probability;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayBudget {
    /// User-experienced delay bound `D_max` in slots.
    pub d_max: u32,
    /// Core network and backhaul delay `D^r` in slots.
    pub d_core: u32,
    /// Decoding delay per transmission slot (`κ`).
    pub decode_factor: f64,
}

impl DelayBudget {
    pub fn decode_delay(&self, tx_delay: u32) -> u32 {
        (self.decode_factor * f64::from(tx_delay)).ceil() as u32
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviceScenario {
    pub state_model: StateModel,
    pub traffic: TrafficModel,
    /// Its bandwidth is replaced by the candidate bandwidth during the search.
    pub link: LinkModel,
    pub budget: DelayBudget,
    pub reliability_target: Probability,
    pub horizon_cap: u32,
    pub bandwidth_cap: f64,
    pub repetition_cap: u32,
    /// Allocation granularity `B₀` in Hz.
    pub subcarrier_bandwidth: f64,
}

impl DeviceScenario {
    pub fn validate(&self) -> Result<()> {
        self.link.validate()?;
        if self.horizon_cap == 0 || self.repetition_cap == 0 {
            return Err(Error::domain(
                "device_scenario",
                "horizon and repetition caps must be positive",
            ));
        }
        if !(self.subcarrier_bandwidth > 0.0 && self.bandwidth_cap >= self.subcarrier_bandwidth) {
            return Err(Error::domain(
                "device_scenario",
                "bandwidth cap must be at least one subcarrier",
            ));
        }
        if !(self.budget.decode_factor >= 0.0 && self.budget.decode_factor.is_finite()) {
            return Err(Error::domain(
                "device_scenario",
                "decode factor must be non-negative",
            ));
        }
        Ok(())
    }
}

/// Queue/transmission split of a fixed communication budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelaySplit {
    pub queue_delay: u32,
    pub tx_delay: u32,
    pub decode_delay: u32,
    pub repetitions: u32,
    pub eps_queue: Probability,
    pub eps_tx: Probability,
}

impl DelaySplit {
    /// `max(ε^q, ε^t)`, the quantity the split minimizes.
    pub fn max_error(&self) -> f64 {
        self.eps_queue.value().max(self.eps_tx.value())
    }

    /// `ε^q + ε^t`, the communication share of the overall error.
    pub fn comm_error(&self) -> f64 {
        self.eps_queue.value() + self.eps_tx.value()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoDesignSolution {
    pub horizon: u32,
    pub queue_delay: u32,
    pub tx_delay: u32,
    pub decode_delay: u32,
    pub repetitions: u32,
    pub bandwidth: f64,
    pub eps_prediction: Probability,
    pub eps_queue: Probability,
    pub eps_tx: Probability,
    pub eps_overall: Probability,
}

impl CoDesignSolution {
    fn new(horizon: u32, bandwidth: f64, eps_prediction: Probability, split: DelaySplit) -> Self {
        let total = eps_prediction.value() + split.eps_queue.value() + split.eps_tx.value();
        CoDesignSolution {
            horizon,
            queue_delay: split.queue_delay,
            tx_delay: split.tx_delay,
            decode_delay: split.decode_delay,
            repetitions: split.repetitions,
            bandwidth,
            eps_prediction,
            eps_queue: split.eps_queue,
            eps_tx: split.eps_tx,
            eps_overall: Probability::saturating(total),
        }
    }

    /// `D^q + D^t + D^d + D^r − T^p`, the user-experienced delay.
    pub fn experienced_delay(&self, d_core: u32) -> i64 {
        i64::from(self.queue_delay)
            + i64::from(self.tx_delay)
            + i64::from(self.decode_delay)
            + i64::from(d_core)
            - i64::from(self.horizon)
    }
}

/// Per-copy decoding error at `bandwidth`. Links outside the validity range
/// of the closed form count as certain loss.
pub fn per_copy_error(link: &LinkModel, bandwidth: f64) -> Probability {
    expected_decoding_error_approx(&link.with_bandwidth(bandwidth)).unwrap_or(Probability::ONE)
}

/// Solver state shared by every query on one scenario: the prediction error
/// table over all horizons, the queue decay rate for each repetition count,
/// and a counter of delay-split evaluations.
#[derive(Debug)]
pub struct Solver {
    scenario: DeviceScenario,
    eps_prediction: Vec<Probability>,
    queue_exponent: Vec<Option<f64>>,
    evaluations: AtomicU64,
}

impl Solver {
    pub fn new(scenario: DeviceScenario) -> Result<Self> {
        scenario.validate()?;
        let eps_prediction = prediction_error_table(&scenario.state_model, scenario.horizon_cap);
        let lambda = scenario.traffic.arrival_rate();
        let tau = f64::from(scenario.link.copy_duration);
        let queue_exponent = (1..=scenario.repetition_cap)
            .map(|k| violation_exponent(lambda, f64::from(k) * tau).ok())
            .collect();
        Ok(Solver {
            scenario,
            eps_prediction,
            queue_exponent,
            evaluations: AtomicU64::new(0),
        })
    }

    pub fn scenario(&self) -> &DeviceScenario {
        &self.scenario
    }

    pub fn eps_prediction(&self, horizon: u32) -> Probability {
        self.eps_prediction[horizon as usize]
    }

    /// Delay-split evaluations performed so far.
    pub fn evaluations(&self) -> u64 {
        self.evaluations.load(Ordering::Relaxed)
    }

    pub fn reset_evaluations(&self) {
        self.evaluations.store(0, Ordering::Relaxed);
    }

    fn check_horizon(&self, horizon: u32) -> Result<()> {
        if horizon > self.scenario.horizon_cap {
            return Err(Error::domain(
                "horizon",
                format!("{horizon} exceeds the cap {}", self.scenario.horizon_cap),
            ));
        }
        Ok(())
    }

    /// Every feasible repetition count for the horizon, in increasing `K`.
    fn candidates(&self, horizon: u32, copy_error: Probability) -> Result<Vec<DelaySplit>> {
        let s = &self.scenario;
        let budget = i64::from(s.budget.d_max) + i64::from(horizon) - i64::from(s.budget.d_core);
        let tau = s.link.copy_duration;
        let mut out = Vec::new();
        let mut fits_any = false;
        for k in 1..=s.repetition_cap {
            let tx_delay = k * tau;
            let decode_delay = s.budget.decode_delay(tx_delay);
            let queue_delay = budget - i64::from(tx_delay) - i64::from(decode_delay);
            if queue_delay < 1 {
                break;
            }
            fits_any = true;
            let Some(phi) = self.queue_exponent[(k - 1) as usize] else {
                continue;
            };
            out.push(DelaySplit {
                queue_delay: queue_delay as u32,
                tx_delay,
                decode_delay,
                repetitions: k,
                eps_queue: Probability::saturating((queue_delay as f64 * phi).exp()),
                eps_tx: Probability::saturating(copy_error.value().powi(k as i32)),
            });
        }
        if out.is_empty() {
            let reason = if fits_any {
                Infeasibility::QueueUnstable {
                    arrival_rate: s.traffic.arrival_rate(),
                }
            } else {
                Infeasibility::BudgetTooSmall {
                    budget,
                    copy: i64::from(tau) + i64::from(s.budget.decode_delay(tau)),
                }
            };
            return Err(reason.into());
        }
        Ok(out)
    }

    fn split_with(&self, horizon: u32, copy_error: Probability) -> Result<DelaySplit> {
        self.evaluations.fetch_add(1, Ordering::Relaxed);
        let mut best: Option<DelaySplit> = None;
        for c in self.candidates(horizon, copy_error)? {
            if best.is_none_or(|b| c.max_error() < b.max_error()) {
                best = Some(c);
            }
        }
        Ok(best.expect("candidates are non-empty"))
    }

    /// Repetition count balancing `ε^q` and `ε^t`: the feasible `K`
    /// minimizing `max(ε^q, ε^t)`, smallest `K` on ties.
    pub fn split_delay_budget(&self, horizon: u32, bandwidth: f64) -> Result<DelaySplit> {
        self.check_horizon(horizon)?;
        self.split_with(horizon, per_copy_error(&self.scenario.link, bandwidth))
    }

    /// Balanced split at a fixed horizon, as a full solution.
    pub fn evaluate_horizon(&self, horizon: u32, bandwidth: f64) -> Result<CoDesignSolution> {
        let split = self.split_delay_budget(horizon, bandwidth)?;
        Ok(CoDesignSolution::new(
            horizon,
            bandwidth,
            self.eps_prediction(horizon),
            split,
        ))
    }

    fn min_overall_error_with(
        &self,
        bandwidth: f64,
        copy_error: Probability,
    ) -> Result<CoDesignSolution> {
        let cap = self.scenario.horizon_cap;
        let evaluate = |t: u32| {
            self.split_with(t, copy_error)
                .map(|split| CoDesignSolution::new(t, bandwidth, self.eps_prediction(t), split))
        };
        // ε^p(T) ≤ ε^q + ε^t, which is 2ε^t on a balanced split. Integer
        // delays can leave ε^q far below ε^t, and then the sum is the quantity
        // whose crossing with ε^p bounds the gap to the optimum. A horizon
        // without a feasible split counts as certain communication loss.
        let below_crossing = |t: u32| {
            let comm = self
                .split_with(t, copy_error)
                .map_or(1.0, |s| s.comm_error());
            self.eps_prediction(t).value() <= comm
        };
        let crossing = if !below_crossing(0) {
            0
        } else if below_crossing(cap) {
            cap
        } else {
            let (mut lo, mut hi) = (0, cap);
            while hi - lo > 1 {
                let mid = lo + (hi - lo) / 2;
                if below_crossing(mid) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            lo
        };
        let mut best: Option<CoDesignSolution> = None;
        for t in [crossing, crossing + 1] {
            if t > cap {
                continue;
            }
            if let Ok(sol) = evaluate(t) {
                if best.is_none_or(|b| sol.eps_overall < b.eps_overall) {
                    best = Some(sol);
                }
            }
        }
        best.ok_or_else(|| Infeasibility::NoFeasibleHorizon { horizon_cap: cap }.into())
    }

    /// Near-optimal overall error at a fixed bandwidth: binary search for
    /// the largest horizon where `ε^p ≤ ε^q + ε^t`, then the better of
    /// that horizon and the next one.
    pub fn min_overall_error(&self, bandwidth: f64) -> Result<CoDesignSolution> {
        if !(bandwidth > 0.0) {
            return Err(Error::domain(
                "min_overall_error",
                "bandwidth must be positive",
            ));
        }
        self.min_overall_error_with(bandwidth, per_copy_error(&self.scenario.link, bandwidth))
    }

    /// Minimum over every horizon and repetition count, with the queue delay
    /// implied by the budget.
    pub fn exhaustive_oracle(&self, bandwidth: f64) -> Result<CoDesignSolution> {
        if !(bandwidth > 0.0) {
            return Err(Error::domain(
                "exhaustive_oracle",
                "bandwidth must be positive",
            ));
        }
        let copy_error = per_copy_error(&self.scenario.link, bandwidth);
        let mut best: Option<CoDesignSolution> = None;
        for t in 0..=self.scenario.horizon_cap {
            let Ok(cands) = self.candidates(t, copy_error) else {
                continue;
            };
            for c in cands {
                let sol = CoDesignSolution::new(t, bandwidth, self.eps_prediction(t), c);
                if best.is_none_or(|b| sol.eps_overall < b.eps_overall) {
                    best = Some(sol);
                }
            }
        }
        best.ok_or_else(|| {
            Infeasibility::NoFeasibleHorizon {
                horizon_cap: self.scenario.horizon_cap,
            }
            .into()
        })
    }

    /// Smallest bandwidth, in whole subcarriers, whose near-optimal overall
    /// error meets the reliability target.
    pub fn min_bandwidth(&self) -> Result<CoDesignSolution> {
        self.min_bandwidth_for(&self.scenario.link)
    }

    fn min_bandwidth_for(&self, link: &LinkModel) -> Result<CoDesignSolution> {
        let s = &self.scenario;
        let b0 = s.subcarrier_bandwidth;
        let max_units = (s.bandwidth_cap / b0 + 1e-9).floor() as u64;
        let target = s.reliability_target.value();
        let solve = |units: u64| {
            let b = units as f64 * b0;
            self.min_overall_error_with(b, per_copy_error(link, b))
        };
        let error_of =
            |r: &Result<CoDesignSolution>| r.as_ref().map_or(1.0, |sol| sol.eps_overall.value());

        let at_cap = solve(max_units);
        let cap_error = error_of(&at_cap);
        if cap_error > target {
            return Err(Infeasibility::BandwidthCap {
                bandwidth_cap: max_units as f64 * b0,
                target,
                achieved: cap_error,
            }
            .into());
        }
        let mut probes: Vec<(u64, f64)> = vec![(max_units, cap_error)];
        let mut check = |units: u64, err: f64| -> Result<()> {
            let pos = probes.partition_point(|p| p.0 < units);
            // The near-optimal error is not exactly monotone: far below the
            // target the chosen horizon can shift and move the value by a
            // hair. Only changes that could matter at the target's scale
            // count as violations.
            let slack = |e: f64| e * (1.0 + 1e-9) + 1e-6 * target;
            if pos > 0 && slack(probes[pos - 1].1) < err {
                let (l, le) = probes[pos - 1];
                return Err(Error::NonMonotoneBandwidth {
                    lower: l as f64 * b0,
                    lower_error: le,
                    upper: units as f64 * b0,
                    upper_error: err,
                });
            }
            if pos < probes.len() && slack(err) < probes[pos].1 {
                let (u, ue) = probes[pos];
                return Err(Error::NonMonotoneBandwidth {
                    lower: units as f64 * b0,
                    lower_error: err,
                    upper: u as f64 * b0,
                    upper_error: ue,
                });
            }
            probes.insert(pos, (units, err));
            Ok(())
        };

        let mut best = at_cap?;
        let first = solve(1);
        let first_error = error_of(&first);
        check(1, first_error)?;
        if first_error <= target {
            return first;
        }
        // Invariant: `lo` misses the target, `hi` meets it.
        let (mut lo, mut hi) = (1u64, max_units);
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            let res = solve(mid);
            let err = error_of(&res);
            check(mid, err)?;
            if err <= target {
                hi = mid;
                best = res?;
            } else {
                lo = mid;
            }
        }
        Ok(best)
    }

    /// [`Solver::min_bandwidth`] with the link's large-scale gain replaced.
    pub fn min_bandwidth_at_gain(&self, large_scale_gain: f64) -> Result<CoDesignSolution> {
        self.min_bandwidth_for(&self.scenario.link.with_gain(large_scale_gain))
    }
}

pub fn split_delay_budget(
    scenario: &DeviceScenario,
    horizon: u32,
    bandwidth: f64,
) -> Result<DelaySplit> {
    Solver::new(scenario.clone())?.split_delay_budget(horizon, bandwidth)
}

pub fn min_overall_error(scenario: &DeviceScenario, bandwidth: f64) -> Result<CoDesignSolution> {
    Solver::new(scenario.clone())?.min_overall_error(bandwidth)
}

pub fn min_bandwidth(scenario: &DeviceScenario) -> Result<CoDesignSolution> {
    Solver::new(scenario.clone())?.min_bandwidth()
}

pub fn exhaustive_oracle(scenario: &DeviceScenario, bandwidth: f64) -> Result<Probability> {
    Ok(Solver::new(scenario.clone())?
        .exhaustive_oracle(bandwidth)?
        .eps_overall)
}

/// Total bandwidth for `n_devices` identical devices at the worst-case
/// large-scale gain configured in the template's link.
pub fn capacity_worst_case(template: &DeviceScenario, n_devices: u32) -> Result<f64> {
    if n_devices == 0 {
        return Err(Error::domain(
            "capacity_worst_case",
            "device count must be positive",
        ));
    }
    let b = min_bandwidth(template)?.bandwidth;
    Ok(f64::from(n_devices) * b)
}

/// Random device placement for [`capacity_known_distribution`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Deployment {
    pub path_loss: PathLossModel,
    pub shadowing: Shadowing,
    pub min_distance: f64,
    pub max_distance: f64,
    /// Gain grid step in dB used to share per-device solves. Gains are
    /// rounded down, so the shared solution never under-provisions.
    pub gain_step_db: f64,
}

impl Deployment {
    pub fn validate(&self) -> Result<()> {
        self.path_loss.validate()?;
        if !(self.min_distance >= 1.0 && self.max_distance >= self.min_distance) {
            return Err(Error::domain(
                "deployment",
                "distance range must satisfy 1 ≤ min ≤ max",
            ));
        }
        if !(self.gain_step_db > 0.0) {
            return Err(Error::domain("deployment", "gain step must be positive"));
        }
        Ok(())
    }
}

/// How a placed device's shadowing enters its large-scale gain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shadowing {
    /// One log-normal draw per device.
    Sampled,
    /// The availability quantile, so only the distance is random.
    WorstCase,
}

/// Shared per-gain-cell cache of minimum bandwidths (`None` when the device
/// cannot meet the target under the cap).
struct BandwidthCache<'a> {
    solver: &'a Solver,
    step_db: f64,
    cells: Mutex<HashMap<i64, Option<f64>>>,
}

impl BandwidthCache<'_> {
    fn bandwidth(&self, gain_db: f64) -> Result<Option<f64>> {
        let cell = (gain_db / self.step_db).floor() as i64;
        if let Some(v) = self.cells.lock().expect("cache lock").get(&cell) {
            return Ok(*v);
        }
        let gain = 10f64.powf(cell as f64 * self.step_db / 10.0);
        let value = match self.solver.min_bandwidth_at_gain(gain) {
            Ok(sol) => Some(sol.bandwidth),
            Err(Error::Infeasible(_)) => None,
            Err(e) => return Err(e),
        };
        self.cells.lock().expect("cache lock").insert(cell, value);
        Ok(value)
    }
}

/// Empirical probability that `n_devices` devices, placed uniformly in the
/// distance range with shadowing per `deployment.shadowing`, need more than `b_total` Hz
/// in total. A device that cannot meet its target counts as exceeding.
/// Deterministic in `seed` for any number of workers.
pub fn capacity_known_distribution(
    template: &DeviceScenario,
    deployment: &Deployment,
    n_devices: u32,
    b_total: f64,
    draws: u64,
    seed: u64,
    workers: usize,
) -> Result<Probability> {
    let solver = Solver::new(template.clone())?;
    capacity_with_solver(
        &solver, deployment, n_devices, b_total, draws, seed, workers,
    )
}

/// [`capacity_known_distribution`] on an existing solver, so sweeps over the
/// device count share its state.
pub fn capacity_with_solver(
    solver: &Solver,
    deployment: &Deployment,
    n_devices: u32,
    b_total: f64,
    draws: u64,
    seed: u64,
    workers: usize,
) -> Result<Probability> {
    deployment.validate()?;
    if draws == 0 || n_devices == 0 {
        return Err(Error::domain(
            "capacity_known_distribution",
            "draws and device count must be positive",
        ));
    }
    let shadowing = Normal::new(0.0, deployment.path_loss.shadowing_std_db)
        .map_err(|e| Error::domain("capacity_known_distribution", e.to_string()))?;
    let worst_shadow = deployment.path_loss.worst_case_shadowing_db()?;
    let cache = BandwidthCache {
        solver,
        step_db: deployment.gain_step_db,
        cells: Mutex::new(HashMap::new()),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::domain("thread_pool", e.to_string()))?;
    let outcomes: Vec<Result<bool>> = pool.install(|| {
        (0..draws as usize)
            .into_par_iter()
            .map(|draw| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(draw as u64);
                let mut total = 0.0;
                for _ in 0..n_devices {
                    let d = rng.random_range(deployment.min_distance..=deployment.max_distance);
                    let s = match deployment.shadowing {
                        Shadowing::Sampled => shadowing.sample(&mut rng),
                        Shadowing::WorstCase => worst_shadow,
                    };
                    let gain_db = s - deployment.path_loss.mean_loss_db(d);
                    match cache.bandwidth(gain_db)? {
                        Some(b) => total += b,
                        None => return Ok(true),
                    }
                }
                Ok(total > b_total)
            })
            .collect()
    });
    let mut exceed = 0u64;
    for o in outcomes {
        exceed += u64::from(o?);
    }
    Probability::new(exceed as f64 / draws as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phy::worst_case_gain;
    use crate::prediction::build_constant_accel_model;

    fn dbm(v: f64) -> f64 {
        10f64.powf(v / 10.0) * 1e-3
    }

    pub(crate) fn reference_scenario() -> DeviceScenario {
        DeviceScenario {
            state_model: build_constant_accel_model(
                1e-4,
                0.01,
                [0.1, f64::INFINITY, f64::INFINITY],
                [0.01, 0.2, 0.1],
            )
            .unwrap(),
            traffic: TrafficModel::new(0.01).unwrap(),
            link: LinkModel {
                bandwidth: 440e3,
                tx_power: dbm(23.0),
                noise_psd: dbm(-174.0),
                large_scale_gain: worst_case_gain(&PathLossModel::default(), 200.0).unwrap(),
                snr_loss: 1.0,
                n_antennas: 32,
                data_fraction: 1.0,
                payload_bits: 160,
                slot_duration: 1e-4,
                copy_duration: 5,
            },
            budget: DelayBudget {
                d_max: 0,
                d_core: 100,
                decode_factor: 0.0,
            },
            reliability_target: Probability::new(1e-5).unwrap(),
            horizon_cap: 400,
            bandwidth_cap: 10e6,
            repetition_cap: 20,
            subcarrier_bandwidth: 15e3,
        }
    }

    #[test]
    fn tight_budget_allows_one_copy() {
        let s = reference_scenario();
        let solver = Solver::new(s).unwrap();
        // Budget 100 + 108 − 100 = 8 slots: one copy of 5 plus 3 slots queueing.
        let split = solver.split_delay_budget(108, 440e3).unwrap();
        assert_eq!(split.repetitions, 1);
        assert_eq!(split.queue_delay, 3);
        assert!(matches!(
            solver.split_delay_budget(105, 440e3),
            Err(Error::Infeasible(Infeasibility::BudgetTooSmall { .. }))
        ));
    }

    #[test]
    fn split_is_argmin_over_k() {
        let solver = Solver::new(reference_scenario()).unwrap();
        for t in [120, 150, 200, 300] {
            let split = solver.split_delay_budget(t, 440e3).unwrap();
            let all = solver
                .candidates(t, per_copy_error(&solver.scenario.link, 440e3))
                .unwrap();
            for c in &all {
                assert!(split.max_error() <= c.max_error());
            }
        }
    }

    #[test]
    fn delay_identity_holds() {
        let s = reference_scenario();
        let solver = Solver::new(s.clone()).unwrap();
        let sol = solver.min_overall_error(440e3).unwrap();
        assert_eq!(
            sol.experienced_delay(s.budget.d_core),
            i64::from(s.budget.d_max)
        );
        assert!(sol.eps_overall.value() < 1e-3);
    }

    #[test]
    fn singleton_grid_oracle() {
        let mut s = reference_scenario();
        s.horizon_cap = 1;
        s.repetition_cap = 1;
        s.budget.d_core = 0;
        s.budget.d_max = 10;
        let solver = Solver::new(s).unwrap();
        let oracle = solver.exhaustive_oracle(440e3).unwrap();
        let direct0 = solver.evaluate_horizon(0, 440e3).unwrap();
        let direct1 = solver.evaluate_horizon(1, 440e3).unwrap();
        let best = direct0.eps_overall.min_by(direct1.eps_overall);
        assert_eq!(oracle.eps_overall, best);
    }

    trait MinBy {
        fn min_by(self, other: Self) -> Self;
    }
    impl MinBy for Probability {
        fn min_by(self, other: Self) -> Self {
            if other < self {
                other
            } else {
                self
            }
        }
    }

    #[test]
    fn min_bandwidth_postcondition() {
        let solver = Solver::new(reference_scenario()).unwrap();
        let sol = solver.min_bandwidth().unwrap();
        assert!(sol.eps_overall.value() <= 1e-5);
        let below = solver.min_overall_error(sol.bandwidth - 15e3);
        assert!(below.map_or(true, |b| b.eps_overall.value() > 1e-5));
    }

    #[test]
    fn worst_case_capacity_is_linear() {
        let s = reference_scenario();
        let one = capacity_worst_case(&s, 1).unwrap();
        assert_eq!(capacity_worst_case(&s, 6).unwrap(), 6.0 * one);
        assert_eq!(one, min_bandwidth(&s).unwrap().bandwidth);
    }

    #[test]
    fn bandwidth_cap_reports_achieved_error() {
        let mut s = reference_scenario();
        s.bandwidth_cap = 150e3;
        match min_bandwidth(&s) {
            Err(Error::Infeasible(Infeasibility::BandwidthCap { achieved, .. })) => {
                assert!(achieved > 1e-5)
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
