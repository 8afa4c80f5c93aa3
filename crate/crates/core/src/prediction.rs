//! Linear state-transition model, multi-step predictor and its error
//! probability, plus Monte Carlo and trace-based estimates of the same.
//!
//! The state evolves as `X(k+1) = Φ X(k) + W(k)` with independent zero-mean
//! Gaussian noise per feature. The predictor extrapolates the last known
//! state `T` slots ahead with `Φ^T`. Its error on feature `j` is Gaussian
//! with standard deviation `ρ_j(T)` and counts as an error event when
//! `|e_j| > δ_j`.

use crate::error::{Error, Result};
use crate::specfun::{std_normal_cdf, Probability};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

/// Trials per independent random substream in the Monte Carlo routines.
/// Substreams are keyed by `(seed, chunk index)`, so results do not depend
/// on how chunks are spread over workers.
pub const MC_CHUNK: u64 = 1 << 14;

#[derive(Debug, Clone, PartialEq)]
pub struct StateModel {
    phi: DMatrix<f64>,
    process_noise_std: DVector<f64>,
    initial_error_std: DVector<f64>,
    thresholds: DVector<f64>,
    slot_duration: f64,
}

impl StateModel {
    /// `thresholds` may contain `+∞` for features that are not monitored.
    pub fn new(
        phi: DMatrix<f64>,
        process_noise_std: DVector<f64>,
        initial_error_std: DVector<f64>,
        thresholds: DVector<f64>,
        slot_duration: f64,
    ) -> Result<Self> {
        let f = phi.nrows();
        if f == 0 || phi.ncols() != f {
            return Err(Error::domain(
                "state_model",
                "phi must be a non-empty square matrix",
            ));
        }
        if process_noise_std.len() != f || initial_error_std.len() != f || thresholds.len() != f {
            return Err(Error::domain(
                "state_model",
                format!("all vectors must have length {f}"),
            ));
        }
        if phi.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("state_model", "phi has non-finite entries"));
        }
        let bad_std = |v: &DVector<f64>| v.iter().any(|s| !(s.is_finite() && *s >= 0.0));
        if bad_std(&process_noise_std) || bad_std(&initial_error_std) {
            return Err(Error::domain(
                "state_model",
                "standard deviations must be finite and non-negative",
            ));
        }
        if thresholds.iter().any(|d| !(*d > 0.0)) {
            return Err(Error::domain("state_model", "thresholds must be positive"));
        }
        if !(slot_duration > 0.0 && slot_duration.is_finite()) {
            return Err(Error::domain(
                "state_model",
                "slot duration must be positive",
            ));
        }
        Ok(StateModel {
            phi,
            process_noise_std,
            initial_error_std,
            thresholds,
            slot_duration,
        })
    }

    pub fn n_features(&self) -> usize {
        self.phi.nrows()
    }

    pub fn phi(&self) -> &DMatrix<f64> {
        &self.phi
    }

    pub fn process_noise_std(&self) -> &DVector<f64> {
        &self.process_noise_std
    }

    pub fn initial_error_std(&self) -> &DVector<f64> {
        &self.initial_error_std
    }

    pub fn thresholds(&self) -> &DVector<f64> {
        &self.thresholds
    }

    pub fn slot_duration(&self) -> f64 {
        self.slot_duration
    }

    pub fn with_thresholds(mut self, thresholds: DVector<f64>) -> Result<Self> {
        if thresholds.len() != self.n_features() || thresholds.iter().any(|d| !(*d > 0.0)) {
            return Err(Error::domain(
                "state_model",
                "thresholds must be positive, one per feature",
            ));
        }
        self.thresholds = thresholds;
        Ok(self)
    }
}

/// Location/velocity/acceleration model of one-dimensional motion with
/// Newtonian transition matrix and noise on the acceleration only.
pub fn build_constant_accel_model(
    slot_duration: f64,
    accel_noise_std: f64,
    thresholds: [f64; 3],
    initial_error_std: [f64; 3],
) -> Result<StateModel> {
    if !(slot_duration > 0.0) {
        return Err(Error::domain(
            "build_constant_accel_model",
            format!("slot duration {slot_duration} must be positive"),
        ));
    }
    let ts = slot_duration;
    let phi = DMatrix::from_row_slice(3, 3, &[1.0, ts, 0.5 * ts * ts, 0.0, 1.0, ts, 0.0, 0.0, 1.0]);
    StateModel::new(
        phi,
        DVector::from_vec(vec![0.0, 0.0, accel_noise_std]),
        DVector::from_row_slice(&initial_error_std),
        DVector::from_row_slice(&thresholds),
        slot_duration,
    )
}

/// Per-feature prediction error standard deviations for every horizon in
/// `0..=max_horizon`.
///
/// `ρ_j(T)² = Σ_{p=0}^{T−1} Σ_m (Φ^p)_{jm}² σ_m²  +  Σ_m (Φ^T)_{jm}² σ0_m²`,
/// the first sum being the accumulated transition noise and the second the
/// propagated error of the state the prediction starts from.
pub fn error_std_table(model: &StateModel, max_horizon: u32) -> Vec<DVector<f64>> {
    let f = model.n_features();
    let noise_var = model.process_noise_std.map(|s| s * s);
    let init_var = model.initial_error_std.map(|s| s * s);
    let mut power = DMatrix::<f64>::identity(f, f);
    let mut accumulated = DVector::<f64>::zeros(f);
    let mut out = Vec::with_capacity(max_horizon as usize + 1);
    for t in 0..=max_horizon {
        let squared = power.map(|v| v * v);
        let rho = (&accumulated + &squared * &init_var).map(f64::sqrt);
        out.push(rho);
        if t < max_horizon {
            accumulated += &squared * &noise_var;
            power = &model.phi * power;
        }
    }
    out
}

pub fn error_std_vector(model: &StateModel, horizon: u32) -> DVector<f64> {
    error_std_table(model, horizon)
        .pop()
        .expect("table has horizon + 1 entries")
}

/// `1 − Π_j P{|e_j| ≤ δ_j}` for independent zero-mean Gaussian errors,
/// with `P{|e_j| > δ_j} = 2ψ(−δ_j/ρ_j)`. Zero spread or an infinite
/// threshold contributes no error. The product is formed in the log domain.
pub fn error_prob_from_std(thresholds: &DVector<f64>, stds: &DVector<f64>) -> Probability {
    let mut log_ok = 0.0;
    for (delta, rho) in thresholds.iter().zip(stds.iter()) {
        if *rho <= 0.0 || delta.is_infinite() {
            continue;
        }
        let tail = std_normal_cdf(-delta / rho).map_or(0.0, Probability::value);
        let exceed = (2.0 * tail).min(1.0);
        log_ok += (-exceed).ln_1p();
    }
    Probability::saturating(-log_ok.exp_m1())
}

pub fn prediction_error_prob(model: &StateModel, horizon: u32) -> Probability {
    error_prob_from_std(&model.thresholds, &error_std_vector(model, horizon))
}

/// ε^p for every horizon in `0..=max_horizon`.
pub fn prediction_error_table(model: &StateModel, max_horizon: u32) -> Vec<Probability> {
    error_std_table(model, max_horizon)
        .iter()
        .map(|rho| error_prob_from_std(&model.thresholds, rho))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionErrorProfile {
    pub horizon: u32,
    pub per_feature_std: DVector<f64>,
    pub error_prob: Probability,
}

pub fn error_profile(model: &StateModel, horizon: u32) -> PredictionErrorProfile {
    let per_feature_std = error_std_vector(model, horizon);
    let error_prob = error_prob_from_std(&model.thresholds, &per_feature_std);
    PredictionErrorProfile {
        horizon,
        per_feature_std,
        error_prob,
    }
}

/// Draws trajectories of the transition model and measures the predictor's
/// error. Buffers are reused across trials.
struct TrajectorySampler<'a> {
    model: &'a StateModel,
    phi: Vec<f64>,
    phi_pow: Vec<f64>,
    horizon: u32,
    state: Vec<f64>,
    scratch: Vec<f64>,
    estimate: Vec<f64>,
}

impl<'a> TrajectorySampler<'a> {
    fn new(model: &'a StateModel, horizon: u32) -> Self {
        let f = model.n_features();
        let power = model.phi.pow(horizon);
        let row_major = |m: &DMatrix<f64>| {
            let mut v = Vec::with_capacity(f * f);
            for i in 0..f {
                for j in 0..f {
                    v.push(m[(i, j)]);
                }
            }
            v
        };
        TrajectorySampler {
            model,
            phi: row_major(&model.phi),
            phi_pow: row_major(&power),
            horizon,
            state: vec![0.0; f],
            scratch: vec![0.0; f],
            estimate: vec![0.0; f],
        }
    }

    fn matvec(m: &[f64], v: &[f64], out: &mut [f64]) {
        let f = v.len();
        for (i, o) in out.iter_mut().enumerate() {
            *o = m[i * f..(i + 1) * f]
                .iter()
                .zip(v)
                .map(|(a, b)| a * b)
                .sum();
        }
    }

    /// Runs one trial from the zero state and leaves the prediction error
    /// `X(k+T) − Φ^T X̃(k)` in `self.state`.
    fn sample<R: Rng>(&mut self, rng: &mut R) {
        let f = self.state.len();
        self.state.iter_mut().for_each(|x| *x = 0.0);
        // The predictor only knows the current state up to its initial error.
        for j in 0..f {
            let s = self.model.initial_error_std[j];
            self.scratch[j] = if s > 0.0 {
                self.state[j] + s * rng.sample::<f64, _>(StandardNormal)
            } else {
                self.state[j]
            };
        }
        Self::matvec(&self.phi_pow, &self.scratch, &mut self.estimate);
        for _ in 0..self.horizon {
            Self::matvec(&self.phi, &self.state, &mut self.scratch);
            for j in 0..f {
                let s = self.model.process_noise_std[j];
                if s > 0.0 {
                    self.scratch[j] += s * rng.sample::<f64, _>(StandardNormal);
                }
            }
            std::mem::swap(&mut self.state, &mut self.scratch);
        }
        for j in 0..f {
            self.state[j] -= self.estimate[j];
        }
    }

    fn error(&self) -> &[f64] {
        &self.state
    }
}

fn substream(seed: u64, chunk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    rng
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::domain("thread_pool", e.to_string()))
}

fn chunk_ranges(trials: u64) -> impl IndexedParallelIterator<Item = (u64, u64)> {
    let chunks = trials.div_ceil(MC_CHUNK) as usize;
    (0..chunks).into_par_iter().map(move |c| {
        let c = c as u64;
        (c, MC_CHUNK.min(trials - c * MC_CHUNK))
    })
}

/// Fraction of `trials` simulated predictions with any feature's error
/// beyond its threshold. Deterministic in `(seed, trials)` for any number of
/// workers.
pub fn simulate_prediction_error(
    model: &StateModel,
    horizon: u32,
    trials: u64,
    seed: u64,
    workers: usize,
) -> Result<Probability> {
    if trials == 0 {
        return Err(Error::domain(
            "simulate_prediction_error",
            "trials must be positive",
        ));
    }
    let thresholds: Vec<f64> = model.thresholds.iter().copied().collect();
    let failures: u64 = pool(workers)?.install(|| {
        chunk_ranges(trials)
            .map(|(chunk, n)| {
                let mut rng = substream(seed, chunk);
                let mut sampler = TrajectorySampler::new(model, horizon);
                let mut count = 0u64;
                for _ in 0..n {
                    sampler.sample(&mut rng);
                    let hit = sampler
                        .error()
                        .iter()
                        .zip(&thresholds)
                        .any(|(e, d)| e.abs() > *d);
                    count += u64::from(hit);
                }
                count
            })
            .sum()
    });
    Probability::new(failures as f64 / trials as f64)
}

/// Sample standard deviation of each feature's prediction error over
/// `trials` simulated trajectories (zero-mean estimator).
pub fn simulate_error_std(
    model: &StateModel,
    horizon: u32,
    trials: u64,
    seed: u64,
    workers: usize,
) -> Result<DVector<f64>> {
    if trials == 0 {
        return Err(Error::domain(
            "simulate_error_std",
            "trials must be positive",
        ));
    }
    let f = model.n_features();
    let per_chunk: Vec<Vec<f64>> = pool(workers)?.install(|| {
        chunk_ranges(trials)
            .map(|(chunk, n)| {
                let mut rng = substream(seed, chunk);
                let mut sampler = TrajectorySampler::new(model, horizon);
                let mut sq = vec![0.0; f];
                for _ in 0..n {
                    sampler.sample(&mut rng);
                    for (acc, e) in sq.iter_mut().zip(sampler.error()) {
                        *acc += e * e;
                    }
                }
                sq
            })
            .collect()
    });
    let mut total = DVector::<f64>::zeros(f);
    for chunk in per_chunk {
        for (t, v) in total.iter_mut().zip(chunk) {
            *t += v;
        }
    }
    Ok(total.map(|s| (s / trials as f64).sqrt()))
}

/// First feature (location) of one simulated trajectory of `len` slots,
/// starting from the zero state.
pub fn sample_location_trace(model: &StateModel, len: usize, seed: u64) -> Vec<f64> {
    let f = model.n_features();
    let mut rng = substream(seed, u64::MAX);
    let mut state = DVector::<f64>::zeros(f);
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        out.push(state[0]);
        let mut next = &model.phi * &state;
        for j in 0..f {
            let s = model.process_noise_std[j];
            if s > 0.0 {
                next[j] += s * rng.sample::<f64, _>(StandardNormal);
            }
        }
        state = next;
    }
    out
}

/// Empirical prediction error probability on a recorded location trace.
///
/// Velocity and acceleration come from second-order finite differences
/// (central in the interior, one-sided at the ends), each sample is
/// extrapolated `horizon` slots with the constant-acceleration transition,
/// and the result is the fraction of positions where the extrapolation
/// misses the recorded location by more than `threshold`.
pub fn evaluate_trace(
    locations: &[f64],
    slot_duration: f64,
    horizon: u32,
    threshold: f64,
) -> Result<Probability> {
    let n = locations.len();
    let h = horizon as usize;
    if n <= h + 2 {
        return Err(Error::domain(
            "evaluate_trace",
            format!("trace of {n} samples is too short for horizon {horizon}"),
        ));
    }
    if !(slot_duration > 0.0) || !(threshold > 0.0) {
        return Err(Error::domain(
            "evaluate_trace",
            "slot duration and threshold must be positive",
        ));
    }
    if locations.iter().any(|x| !x.is_finite()) {
        return Err(Error::domain(
            "evaluate_trace",
            "trace contains non-finite values",
        ));
    }
    let r = locations;
    let ts = slot_duration;
    let derivatives = |k: usize| -> (f64, f64) {
        if k == 0 {
            (
                (-3.0 * r[0] + 4.0 * r[1] - r[2]) / (2.0 * ts),
                (r[0] - 2.0 * r[1] + r[2]) / (ts * ts),
            )
        } else if k == n - 1 {
            (
                (3.0 * r[k] - 4.0 * r[k - 1] + r[k - 2]) / (2.0 * ts),
                (r[k] - 2.0 * r[k - 1] + r[k - 2]) / (ts * ts),
            )
        } else {
            (
                (r[k + 1] - r[k - 1]) / (2.0 * ts),
                (r[k + 1] - 2.0 * r[k] + r[k - 1]) / (ts * ts),
            )
        }
    };
    let lead = h as f64 * ts;
    let positions = n - h;
    let misses = (0..positions)
        .filter(|&k| {
            let (v, a) = derivatives(k);
            let predicted = r[k] + v * lead + 0.5 * a * lead * lead;
            (r[k + h] - predicted).abs() > threshold
        })
        .count();
    Probability::new(misses as f64 / positions as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn reference_model(initial: [f64; 3]) -> StateModel {
        build_constant_accel_model(1e-4, 0.01, [0.1, 0.1, 0.1], initial).unwrap()
    }

    #[test]
    fn constant_accel_matrix() {
        let m = build_constant_accel_model(
            1e-4,
            0.01,
            [0.1, f64::INFINITY, f64::INFINITY],
            [0.01, 0.2, 0.1],
        )
        .unwrap();
        let expect = [[1.0, 1e-4, 5e-9], [0.0, 1.0, 1e-4], [0.0, 0.0, 1.0]];
        for (i, row) in expect.iter().enumerate() {
            for (j, want) in row.iter().enumerate() {
                assert_relative_eq!(m.phi()[(i, j)], *want, max_relative = 1e-15);
            }
        }
        assert_eq!(m.process_noise_std().as_slice(), &[0.0, 0.0, 0.01]);
        assert_eq!(m.thresholds()[0], 0.1);
    }

    #[test]
    fn constant_accel_rejects_bad_slot() {
        assert!(build_constant_accel_model(0.0, 0.01, [0.1; 3], [0.0; 3]).is_err());
        assert!(build_constant_accel_model(-1e-4, 0.01, [0.1; 3], [0.0; 3]).is_err());
    }

    #[test]
    fn model_validation() {
        let phi = DMatrix::identity(2, 2);
        let v = |a: f64, b: f64| DVector::from_vec(vec![a, b]);
        assert!(StateModel::new(phi.clone(), v(0.1, 0.1), v(0.0, 0.0), v(1.0, 1.0), 1.0).is_ok());
        assert!(StateModel::new(phi.clone(), v(-0.1, 0.1), v(0.0, 0.0), v(1.0, 1.0), 1.0).is_err());
        assert!(StateModel::new(phi.clone(), v(0.1, 0.1), v(0.0, 0.0), v(0.0, 1.0), 1.0).is_err());
        assert!(StateModel::new(phi.clone(), v(0.1, 0.1), v(0.0, 0.0), v(1.0, 1.0), 0.0).is_err());
        assert!(StateModel::new(
            DMatrix::zeros(2, 3),
            v(0.1, 0.1),
            v(0.0, 0.0),
            v(1.0, 1.0),
            1.0
        )
        .is_err());
    }

    #[test]
    fn one_step_std() {
        let m = reference_model([0.0; 3]);
        let rho = error_std_vector(&m, 1);
        assert_eq!(rho[0], 0.0);
        assert_eq!(rho[2], 0.01);
        assert_eq!(error_std_vector(&m, 0).as_slice(), &[0.0, 0.0, 0.0]);
        let with_init = reference_model([0.01, 0.2, 0.1]);
        assert_eq!(
            error_std_vector(&with_init, 0).as_slice(),
            &[0.01, 0.2, 0.1]
        );
    }

    #[test]
    fn random_walk_variance_is_linear() {
        let phi = DMatrix::identity(2, 2);
        let m = StateModel::new(
            phi,
            DVector::from_vec(vec![0.3, 0.7]),
            DVector::zeros(2),
            DVector::from_vec(vec![1.0, 1.0]),
            1.0,
        )
        .unwrap();
        for t in [0u32, 1, 5, 100, 1000] {
            let rho = error_std_vector(&m, t);
            assert_relative_eq!(rho[0] * rho[0], f64::from(t) * 0.09, max_relative = 1e-12);
            assert_relative_eq!(rho[1] * rho[1], f64::from(t) * 0.49, max_relative = 1e-12);
        }
    }

    #[test]
    fn error_prob_reference_points() {
        let m = reference_model([0.0; 3]);
        assert_eq!(prediction_error_prob(&m, 0), Probability::ZERO);
        // Only the acceleration error is nonzero after one step: 2ψ(−10).
        let p = prediction_error_prob(&m, 1).value();
        let oracle = 2.0 * std_normal_cdf(-10.0).unwrap().value();
        assert_relative_eq!(p, oracle, max_relative = 1e-12);
        assert_relative_eq!(p, 1.523_970_604_832_105e-23, max_relative = 1e-12);
    }

    #[test]
    fn table_matches_pointwise_evaluation() {
        let m = reference_model([0.01, 0.2, 0.1]);
        let table = prediction_error_table(&m, 50);
        for t in [0u32, 1, 7, 50] {
            assert_eq!(table[t as usize], prediction_error_prob(&m, t));
        }
    }

    #[test]
    fn profile_consistency() {
        let m = reference_model([0.01, 0.2, 0.1]);
        let prof = error_profile(&m, 40);
        let direct = error_prob_from_std(m.thresholds(), &prof.per_feature_std);
        assert!((prof.error_prob.value() - direct.value()).abs() < 1e-12);
    }

    #[test]
    fn deterministic_system_is_predicted_exactly() {
        let m = build_constant_accel_model(1e-3, 0.0, [0.1; 3], [0.0; 3]).unwrap();
        for h in [0, 1, 30] {
            assert_eq!(
                simulate_prediction_error(&m, h, 1000, 5, 1).unwrap(),
                Probability::ZERO
            );
        }
    }

    #[test]
    fn simulation_rejects_zero_trials() {
        let m = reference_model([0.0; 3]);
        assert!(simulate_prediction_error(&m, 3, 0, 1, 1).is_err());
    }

    #[test]
    fn simulation_is_worker_invariant() {
        let m = build_constant_accel_model(1e-3, 0.01, [0.002, 0.05, 0.02], [0.001, 0.02, 0.01])
            .unwrap();
        let a = simulate_prediction_error(&m, 10, 100_000, 42, 1).unwrap();
        let b = simulate_prediction_error(&m, 10, 100_000, 42, 8).unwrap();
        assert_eq!(a.value().to_bits(), b.value().to_bits());
        let c = simulate_prediction_error(&m, 10, 100_000, 43, 1).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn trace_at_rest_and_quadratic_are_exact() {
        let rest = vec![3.25; 200];
        assert_eq!(
            evaluate_trace(&rest, 1e-3, 20, 1e-6).unwrap(),
            Probability::ZERO
        );
        let ts = 1e-3;
        let accel = 2.5;
        let quad: Vec<f64> = (0..500)
            .map(|k| 0.5 * accel * (k as f64 * ts).powi(2))
            .collect();
        assert_eq!(
            evaluate_trace(&quad, ts, 50, 1e-9).unwrap(),
            Probability::ZERO
        );
    }

    #[test]
    fn trace_too_short_is_rejected() {
        assert!(evaluate_trace(&[0.0; 12], 1e-3, 10, 0.1).is_err());
        assert!(evaluate_trace(&[0.0; 13], 1e-3, 10, 0.1).is_ok());
    }
}
