use ofu_diffusion::agent::{run, AgentConfig, PlannerCache};
use ofu_diffusion::harness::*;
use ofu_diffusion::model::ModelSpec;
use ofu_diffusion::planning::{Grid, GridConfig, SolverOptions};
use ofu_diffusion::process::{rollout, ClockConfig, ConstantPolicy};
use sha2::{Digest, Sha256};

fn small_config() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.agent.theta_grid_points = 7;
    cfg.agent.planner = GridConfig {
        radius: Some(6.0),
        spacing: 0.1,
        actions_per_axis: 17,
    };
    cfg.reference.grid = GridConfig {
        radius: Some(6.0),
        spacing: 0.1,
        actions_per_axis: 17,
    };
    cfg.sweep.epsilons = vec![0.2];
    cfg.sweep.horizons = vec![100.0];
    cfg.sweep.seeds = vec![3];
    cfg
}

fn fixture(eps: f64) -> (ModelSpec, AgentConfig, PlannerCache, f64) {
    let cfg = small_config();
    let model = ModelSpec::benchmark_linear_1d(eps);
    let grid = Grid::new(1, 6.0, 0.1, &model.action_box, 17).unwrap();
    let rho = reference_solution(&model, &grid, &SolverOptions::default())
        .unwrap()
        .rho;
    (
        model,
        cfg.agent,
        PlannerCache::new(grid, SolverOptions::default()),
        rho,
    )
}

#[test]
fn zero_reward_regret_is_horizon_times_gain() {
    let (model, agent, cache, rho) = fixture(0.2);
    let mut r = run(
        &agent,
        &model,
        &ClockConfig::new(0.2, 80.0, 1).unwrap(),
        &cache,
        None,
    )
    .unwrap();
    r.log.rewards.iter_mut().for_each(|v| *v = 0.0);
    let rep = compute_regret(&r.log, rho);
    assert_eq!(rep.regret, 80.0 * rho);
}

#[test]
fn regret_identity_and_decomposition() {
    let (model, agent, cache, rho) = fixture(0.2);
    for seed in 0..3 {
        let r = run(
            &agent,
            &model,
            &ClockConfig::new(0.2, 200.0, seed).unwrap(),
            &cache,
            None,
        )
        .unwrap();
        let rep = compute_regret(&r.log, rho);
        assert!(rep.identity_error() <= rep.identity_tolerance());
        let dec = decompose_regret(&r, &model, rho, &SolverOptions::default()).unwrap();
        assert!(dec.reconstructs(), "{dec:?}");
        assert!((dec.total() - rep.regret).abs() <= dec.budget);
        assert!(
            dec.r3.abs() <= dec.r3_bound * (1.0 + 1e-9) + 1e-12,
            "{} > {}",
            dec.r3,
            dec.r3_bound
        );
        assert!(
            dec.r4.abs() <= dec.r4_bound * (1.0 + 1e-9),
            "{} > {}",
            dec.r4,
            dec.r4_bound
        );
        assert_eq!(dec.switches, r.switches());
        assert_eq!(dec.episode_gains.len(), r.episodes.len());
    }
}

#[test]
fn oracle_has_no_model_error_terms() {
    let (model, agent, cache, rho) = fixture(0.2);
    let oracle = oracle_model(&model);
    let agent = AgentConfig {
        theta_grid_points: 1,
        ..agent
    };
    let r = run(
        &agent,
        &oracle,
        &ClockConfig::new(0.2, 200.0, 4).unwrap(),
        &cache,
        None,
    )
    .unwrap();
    let dec = decompose_regret(&r, &oracle, rho, &SolverOptions::default()).unwrap();
    assert_eq!(dec.r3, 0.0);
    assert_eq!(dec.r4, 0.0);
    assert_eq!(dec.switches, 0);
    assert!(dec.reconstructs());
}

#[test]
fn single_cell_sweep_matches_a_direct_run() {
    let cfg = small_config();
    let result = sweep(&cfg).unwrap();
    assert_eq!(result.runs.len(), 1);
    let row = &result.runs[0];
    assert!(row.completed());

    let ctx = SweepContext::new(&cfg).unwrap();
    let model = ctx.model.with_epsilon(0.2).unwrap();
    let direct = run(
        &ctx.agent,
        &model,
        &ClockConfig::new(0.2, 100.0, 3).unwrap(),
        &ctx.cache,
        None,
    )
    .unwrap();
    let rep = compute_regret(&direct.log, ctx.rho_star(0.2).unwrap());
    assert_eq!(row.regret, Some(rep.regret));
    assert_eq!(row.events, Some(direct.log.n_events()));
    assert_eq!(row.episodes, Some(direct.episodes.len()));
    assert_eq!(result.summary.len(), 1);
    assert_eq!(result.summary[0].median_regret, row.regret);
}

#[test]
fn sweeps_are_deterministic_and_round_trip() {
    let mut cfg = small_config();
    cfg.sweep.seeds = vec![0, 1, 2, 3];
    cfg.sweep.decompose = true;
    let a = sweep(&cfg).unwrap();
    let b = sweep(&cfg).unwrap();
    assert_eq!(a.runs, b.runs);
    assert_eq!(a.summary, b.summary);
    assert_eq!(
        a.runs.iter().map(|r| r.seed).collect::<Vec<_>>(),
        vec![0, 1, 2, 3]
    );

    let dir = tempfile::tempdir().unwrap();
    write_sweep(dir.path(), &cfg, &a).unwrap();
    let back: Vec<RunRow> =
        read_rows(std::fs::File::open(dir.path().join("runs.csv")).unwrap()).unwrap();
    assert_eq!(back, a.runs);
    let text = std::fs::read_to_string(dir.path().join("config.json")).unwrap();
    let cfg2: ExperimentConfig = serde_json::from_str(&text).unwrap();
    assert_eq!(cfg2, cfg);
}

fn summary_rows() -> Vec<SummaryRow> {
    let row = |epsilon: f64, horizon: f64, median: Option<f64>| SummaryRow {
        epsilon,
        horizon,
        runs: 4,
        completed: 4,
        median_regret: median,
        iqr_regret: Some(1.0),
        median_regret_per_time: median.map(|m| m / horizon),
        median_episodes: Some(2.0),
        median_events: Some(horizon / epsilon),
        event_violation_frequency: Some(0.0),
        coverage_frequency: Some(1.0),
        oracle_median_regret: None,
    };
    vec![
        row(0.2, 500.0, Some(12.0)),
        row(0.2, 2000.0, Some(30.0)),
        row(0.05, 500.0, Some(6.0)),
        row(0.05, 2000.0, Some(-1.0)),
    ]
}

fn gap_rows() -> Vec<GapRow> {
    [0.4, 0.2, 0.1]
        .iter()
        .map(|&e| GapRow {
            epsilon: e,
            rho_diffusive: 0.6,
            rho_jump: 0.6 - e / 8.0,
            gap: e / 8.0,
            rho_policy: 0.6 - e / 8.0,
            suboptimality: e * e,
            residual: 1e-12,
        })
        .collect()
}

#[test]
fn plot_points_are_table_values() {
    let specs = plot_specs(&summary_rows(), &gap_rows());
    let regret = specs
        .iter()
        .find(|s| s.name == "regret_vs_horizon")
        .unwrap();
    assert_eq!(regret.series[0].points, vec![(500.0, 12.0), (2000.0, 30.0)]);
    // The negative median is dropped from the logarithmic figure.
    assert_eq!(regret.series[1].points, vec![(500.0, 6.0)]);
    let per_time = specs
        .iter()
        .find(|s| s.name == "regret_per_time_vs_epsilon")
        .unwrap();
    assert_eq!(
        per_time.series[1].points,
        vec![(0.2, 30.0 / 2000.0), (0.05, -1.0 / 2000.0)]
    );
    let gap = specs.iter().find(|s| s.name == "gap_vs_epsilon").unwrap();
    assert_eq!(
        gap.series[0].points,
        vec![(0.4, 0.05), (0.2, 0.025), (0.1, 0.0125)]
    );
    let coverage = specs.iter().find(|s| s.name == "coverage").unwrap();
    assert_eq!(coverage.categories.len(), 4);
}

#[test]
fn figures_are_byte_stable() {
    let digest = |s: &str| Sha256::digest(s.as_bytes());
    let specs = plot_specs(&summary_rows(), &gap_rows());
    for spec in &specs {
        let a = render_svg(spec).unwrap();
        assert!(a.starts_with("<svg"));
        assert_eq!(
            digest(&a),
            digest(&render_svg(spec).unwrap()),
            "{}",
            spec.name
        );
    }
    let mut other = summary_rows();
    other[0].median_regret = Some(13.0);
    let changed = &plot_specs(&other, &gap_rows())[0];
    assert_ne!(
        digest(&render_svg(&specs[0]).unwrap()),
        digest(&render_svg(changed).unwrap())
    );
}

#[test]
fn empty_figures_are_not_written() {
    let mut rows = summary_rows();
    rows.iter_mut().for_each(|r| r.median_regret = None);
    let dir = tempfile::tempdir().unwrap();
    let written = emit_plots(dir.path(), &rows, &[]).unwrap();
    let names: Vec<String> = written
        .iter()
        .map(|p| p.file_stem().unwrap().to_string_lossy().into_owned())
        .collect();
    assert_eq!(names, vec!["regret_per_time_vs_epsilon", "coverage"]);
    assert!(!dir.path().join("plots/regret_vs_horizon.svg").exists());
}

#[test]
fn a_bad_constant_policy_has_linear_regret() {
    let (model, _, _, rho) = fixture(0.2);
    let out = rollout(
        &ConstantPolicy(vec![1.0]),
        &model,
        &ClockConfig::new(0.2, 400.0, 8).unwrap(),
        &[0.0],
        None,
    )
    .unwrap();
    let rep = compute_regret(&out.log, rho);
    assert!(rep.regret / 400.0 > 0.05, "{}", rep.regret / 400.0);
}

#[test]
fn event_flags_hold_on_a_typical_run() {
    let (model, agent, cache, _) = fixture(0.2);
    let r = run(
        &agent,
        &model,
        &ClockConfig::new(0.2, 200.0, 12).unwrap(),
        &cache,
        None,
    )
    .unwrap();
    let flags = event_flags(&r.log, &model, agent.delta / 3.0, 5).unwrap();
    assert!(flags.all(), "{flags:?}");
    assert!(flags.max_state_ratio < 1.0);
    let trace = learning_trace(&r.log, &model, r.schedule.clone(), 50).unwrap();
    assert!(trace.iter().all(|row| row.membership));
    assert!(trace
        .windows(2)
        .all(|w| w[1].n > w[0].n && w[1].beta >= w[0].beta));
}
