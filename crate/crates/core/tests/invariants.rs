//! Property tests of the invariants every run must satisfy.

use ofu_diffusion::harness::{compute_regret, ExperimentConfig};
use ofu_diffusion::model::ModelSpec;
use ofu_diffusion::process::{rollout, sample_arrivals, ClockConfig, EventLog, FnPolicy};
use proptest::prelude::*;

fn log_for(eps: f64, horizon: f64, seed: u64) -> EventLog {
    let model = ModelSpec::benchmark_linear_1d(eps);
    let policy = FnPolicy(|x: &[f64], a: &mut [f64]| a[0] = (-x[0]).clamp(-1.0, 1.0));
    rollout(
        &policy,
        &model,
        &ClockConfig::new(eps, horizon, seed).unwrap(),
        &[0.0],
        None,
    )
    .unwrap()
    .log
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn arrivals_are_increasing_and_inside_the_horizon(eps in 0.01f64..1.0, horizon in 0.0f64..200.0, seed: u64) {
        let cfg = ClockConfig::new(eps, horizon, seed).unwrap();
        let a = sample_arrivals(&cfg).unwrap();
        prop_assert!(a.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(a.iter().all(|&t| t > 0.0 && t <= horizon));
        prop_assert_eq!(a, sample_arrivals(&cfg).unwrap());
    }

    #[test]
    fn logs_have_consistent_shapes(eps in 0.05f64..1.0, horizon in 0.0f64..40.0, seed: u64) {
        let log = log_for(eps, horizon, seed);
        let n = log.n_events();
        prop_assert_eq!(log.states.len(), n + 1);
        prop_assert_eq!(log.actions.len(), n + 1);
        prop_assert_eq!(log.rewards.len(), n);
        prop_assert_eq!(log.marks.len(), n);
        prop_assert_eq!(log.count_at(horizon), n);
        prop_assert_eq!(log.count_at(0.0), 0);
        let model = ModelSpec::benchmark_linear_1d(eps);
        prop_assert_eq!(log.replay_mismatches(&model), 0);
    }

    #[test]
    fn state_is_piecewise_constant_between_arrivals(seed: u64, frac in 0.0f64..1.0) {
        let log = log_for(0.2, 30.0, seed);
        prop_assume!(log.n_events() >= 2);
        let (t0, t1) = (log.arrivals[1], log.arrivals[2]);
        let t = t0 + frac * (t1 - t0);
        prop_assert_eq!(log.state_at(t), log.state(1));
        prop_assert_eq!(log.state_at(t1), log.state(2));
    }

    #[test]
    fn regret_identity_holds(seed: u64, rho in -2.0f64..2.0, horizon in 1.0f64..60.0) {
        let log = log_for(0.1, horizon, seed);
        let rep = compute_regret(&log, rho);
        prop_assert!(rep.identity_error() <= rep.identity_tolerance());
        prop_assert_eq!(rep.events, log.n_events());
    }

    #[test]
    fn regret_is_linear_in_the_reference_gain(seed: u64, r1 in -1.0f64..1.0, r2 in -1.0f64..1.0) {
        let log = log_for(0.1, 20.0, seed);
        let (a, b) = (compute_regret(&log, r1), compute_regret(&log, r2));
        let expected = (r1 - r2) * log.horizon;
        prop_assert!((a.regret - b.regret - expected).abs() <= 1e-12 * (1.0 + log.horizon));
    }

    #[test]
    fn event_log_csv_round_trips(seed: u64) {
        let log = log_for(0.25, 10.0, seed);
        let mut buf = Vec::new();
        log.write_csv(&mut buf).unwrap();
        let back = EventLog::read_csv(buf.as_slice(), log.horizon).unwrap();
        prop_assert_eq!(back, log);
    }

    #[test]
    fn config_survives_json_and_toml(eps in 0.01f64..1.0, delta in 0.001f64..0.5, points in 1usize..40) {
        let mut cfg = ExperimentConfig::default();
        cfg.model.epsilon = eps;
        cfg.agent.delta = delta;
        cfg.agent.theta_grid_points = points;
        let json: ExperimentConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        prop_assert_eq!(&json, &cfg);
        let toml_text = toml::to_string(&cfg).unwrap();
        let back: ExperimentConfig = toml::from_str(&toml_text).unwrap();
        prop_assert_eq!(&back, &cfg);
    }
}
