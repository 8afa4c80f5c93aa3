use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use urllc_codesign::cli::config::ExperimentConfig;
use urllc_codesign::cli::validation::random_chain_model;
use urllc_codesign::phy::{expected_decoding_error, LinkModel};
use urllc_codesign::prediction::{
    error_std_vector, prediction_error_prob, simulate_error_std, simulate_prediction_error,
};
use urllc_codesign::queueing::{delay_violation_prob, simulate_queue_replicated};
use urllc_codesign::specfun::{fading_expectation, q_inverse};
use urllc_codesign::Probability;

/// Randomized models with one monitored feature (so the analytic error is
/// exact despite correlated features), thresholds placed so the analytic
/// error lands in [1e-3, 1e-1].
#[test]
fn prediction_error_matches_simulation_on_random_models() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let trials = 1_000_000u64;
    for case in 0..5u64 {
        let m = random_chain_model(&mut rng);
        let horizon = rng.random_range(10..80u32);
        let target = 10f64.powf(rng.random_range(-3.0..-1.0));
        let rho = error_std_vector(&m, horizon);
        let j = (0..m.n_features())
            .rev()
            .find(|&j| rho[j] > 0.0)
            .expect("some feature is noisy");
        let z = q_inverse(Probability::new(target / 2.0).unwrap()).unwrap();
        let thresholds = DVector::from_fn(m.n_features(), |i, _| {
            if i == j {
                rho[j] * z
            } else {
                f64::INFINITY
            }
        });
        let m = m.with_thresholds(thresholds).unwrap();

        let analytic = prediction_error_prob(&m, horizon).value();
        assert!((1e-3..=1e-1).contains(&analytic));
        let sim = simulate_prediction_error(&m, horizon, trials, 100 + case, 4)
            .unwrap()
            .value();
        let sigma = (analytic * (1.0 - analytic) / trials as f64).sqrt();
        assert!(
            (sim - analytic).abs() <= 3.0 * sigma,
            "case {case}: analytic {analytic:e} simulated {sim:e}"
        );
    }
}

#[test]
fn simulated_error_std_matches_propagation() {
    let cfg = ExperimentConfig::default();
    let m = cfg.scenario.to_scenario().unwrap().state_model;
    let trials = 400_000;
    for horizon in [50, 400] {
        let analytic = error_std_vector(&m, horizon);
        let sim = simulate_error_std(&m, horizon, trials, 9, 4).unwrap();
        for j in 0..3 {
            // Standard error of a sample std is about σ/√(2n).
            let se = analytic[j] / (2.0 * trials as f64).sqrt();
            assert!(
                (sim[j] - analytic[j]).abs() <= 4.0 * se,
                "feature {j} at {horizon}"
            );
        }
    }
}

#[test]
fn queue_simulation_bounded_by_analytic() {
    for (lambda, dt, dq) in [(0.02, 10.0, 60.0), (0.05, 10.0, 40.0), (0.08, 10.0, 60.0)] {
        let analytic = delay_violation_prob(lambda, dq, dt).unwrap().value();
        let sim = simulate_queue_replicated(lambda, dt, dq, 500_000, 4, 17, 4)
            .unwrap()
            .value();
        assert!(
            sim <= 2.0 * analytic,
            "λ={lambda}: simulated {sim:e} vs analytic {analytic:e}"
        );
    }
}

#[test]
fn fading_expectation_of_one() {
    for n in [1, 2, 4, 8, 16, 32, 64] {
        let e = fading_expectation(|_| 1.0, n).unwrap();
        assert!((e - 1.0).abs() < 1e-10, "N_r = {n}: {e}");
    }
}

#[test]
fn decoding_error_vanishes_with_blocklength() {
    // Fixed SNR well above the rate threshold: longer copies drive the
    // averaged error to zero.
    let base = ExperimentConfig::default()
        .scenario
        .to_scenario()
        .unwrap()
        .link;
    let mut prev = 1.0;
    for copy_slots in [5u32, 20, 80, 320] {
        let link = LinkModel {
            copy_duration: copy_slots,
            n_antennas: 4,
            ..base.with_bandwidth(440e3).with_gain(1e-13)
        };
        let e = expected_decoding_error(&link).unwrap().value();
        assert!(e < prev);
        prev = e;
    }
    assert!(prev < 1e-12);
}
