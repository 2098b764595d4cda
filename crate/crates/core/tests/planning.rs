use nalgebra::DMatrix;
use ofu_diffusion::model::{ActionCost, DriftFamily, LinearFamily, ModelSpec, ParamBox, Reward};
use ofu_diffusion::planning::*;
use ofu_diffusion::process::{ClockConfig, ConstantPolicy, Policy};
use std::sync::Arc;

fn linear_1d(a: f64, b: f64, reward: Reward, eps: f64, actions: (f64, f64)) -> ModelSpec {
    ModelSpec::new(
        DriftFamily::Linear(LinearFamily {
            state_dim: 1,
            action_dim: 1,
        }),
        vec![a, b],
        ParamBox::new(vec![a, b], vec![a, b]).unwrap(),
        reward,
        DMatrix::from_element(1, 1, 1.0),
        eps,
        ParamBox::new(vec![actions.0], vec![actions.1]).unwrap(),
    )
    .unwrap()
}

fn bump(center: f64, cost: ActionCost) -> Reward {
    Reward::Bump {
        amplitude: 1.0,
        center: vec![center],
        width: 1.0,
        action_cost: cost,
    }
}

fn opts() -> SolverOptions {
    SolverOptions {
        tol: 1e-9,
        max_iterations: 400_000,
    }
}

#[test]
fn constant_reward_has_constant_gain_and_flat_value() {
    let m = linear_1d(-1.0, 1.0, Reward::Constant { value: 0.7 }, 0.2, (-1.0, 1.0));
    let g = Grid::new(1, 4.0, 0.1, &m.action_box, 5).unwrap();
    let d = solve_diffusive(&m, &g, &opts()).unwrap();
    assert!((d.rho - 0.7).abs() < 1e-12);
    assert!(d.w.iter().all(|v| v.abs() < 1e-12));
    let j = solve_jump(&m, &g, &opts(), None).unwrap();
    assert!((j.rho - 0.7).abs() < 1e-9);
    assert!(j.w.iter().all(|v| v.abs() < 1e-9));
}

#[test]
fn uncontrolled_ou_gain_matches_stationary_law() {
    // Stationary law N(0, 1/2): E exp(-x²) = 1/√2.
    let m = linear_1d(-1.0, 0.0, bump(0.0, ActionCost::None), 0.1, (0.0, 0.0));
    let g = Grid::new(1, 6.0, 0.02, &m.action_box, 1).unwrap();
    let d = solve_diffusive(&m, &g, &opts()).unwrap();
    let exact = 0.5f64.sqrt();
    assert!((d.rho - exact).abs() < 0.02 * exact, "{} vs {exact}", d.rho);
    assert!(d.residual <= 1e-9);
    assert_eq!(d.w[g.origin()], 0.0);
}

#[test]
fn refinement_is_first_order_consistent() {
    let m = ModelSpec::benchmark_linear_1d(0.1);
    let rho = |h: f64| {
        let g = Grid::new(1, 5.0, h, &m.action_box, 33).unwrap();
        solve_diffusive(&m, &g, &opts()).unwrap().rho
    };
    let (a, b, c) = (rho(0.1), rho(0.05), rho(0.025));
    assert!((b - c).abs() <= 0.75 * (a - b).abs() + 1e-9, "{a} {b} {c}");
}

#[test]
fn policy_iteration_agrees_with_value_iteration() {
    let m = ModelSpec::benchmark_linear_1d(0.1);
    let g = Grid::new(1, 4.0, 0.1, &m.action_box, 9).unwrap();
    let pi = solve_diffusive(&m, &g, &opts()).unwrap();
    let vi = relative_value_iteration(&m, &g, &opts(), None).unwrap();
    assert!((pi.rho - vi.rho).abs() < 1e-7, "{} {}", pi.rho, vi.rho);
    let gap =
        pi.w.iter()
            .zip(&vi.w)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
    assert!(gap < 1e-5, "{gap}");
}

#[test]
fn lipschitz_estimate_is_stable_under_refinement() {
    let m = ModelSpec::benchmark_linear_1d(0.1);
    let lw = |h: f64| {
        let g = Grid::new(1, 5.0, h, &m.action_box, 33).unwrap();
        solve_diffusive(&m, &g, &opts()).unwrap().lipschitz_estimate
    };
    let ratio = lw(0.025) / lw(0.05);
    assert!((0.8..=1.25).contains(&ratio), "{ratio}");
}

#[test]
fn two_dimensional_ou_gain() {
    // Stationary law N(0, I/2): E exp(-‖x‖²) = 1/2.
    let m = ModelSpec::new(
        DriftFamily::Linear(LinearFamily {
            state_dim: 2,
            action_dim: 1,
        }),
        vec![-1.0, 0.0, 0.0, -1.0, 0.0, 0.0],
        ParamBox::new(
            vec![-1.0, 0.0, 0.0, -1.0, 0.0, 0.0],
            vec![-1.0, 0.0, 0.0, -1.0, 0.0, 0.0],
        )
        .unwrap(),
        Reward::Bump {
            amplitude: 1.0,
            center: vec![0.0, 0.0],
            width: 1.0,
            action_cost: ActionCost::None,
        },
        DMatrix::identity(2, 2),
        0.2,
        ParamBox::new(vec![0.0], vec![0.0]).unwrap(),
    )
    .unwrap();
    let g = Grid::new(2, 4.0, 0.1, &m.action_box, 1).unwrap();
    let d = solve_diffusive(
        &m,
        &g,
        &SolverOptions {
            tol: 1e-7,
            max_iterations: 400_000,
        },
    )
    .unwrap();
    assert!((d.rho - 0.5).abs() < 0.02, "{}", d.rho);
    assert_eq!(d.w[g.origin()], 0.0);
    let j = solve_jump(
        &m,
        &g,
        &SolverOptions {
            tol: 1e-7,
            max_iterations: 400_000,
        },
        Some(&d.w),
    )
    .unwrap();
    assert!((j.rho - d.rho).abs() < 0.05, "{} {}", j.rho, d.rho);
}

#[test]
fn jump_gain_matches_simulation_of_greedy_policy() {
    // ε = 1 and A = -1: the next state forgets the current one.
    let m = linear_1d(
        -1.0,
        1.0,
        bump(
            1.0,
            ActionCost::Quadratic {
                weight: 0.25,
                clamp: 1.0,
            },
        ),
        1.0,
        (-1.0, 1.0),
    );
    let g = Grid::new(1, 6.0, 0.02, &m.action_box, 33).unwrap();
    let j = Arc::new(solve_jump(&m, &g, &opts(), None).unwrap());
    let pol = GreedyPolicy::new(j.clone(), &m);
    let cfg = ClockConfig::new(1.0, 20_000.0, 11).unwrap();
    let est = evaluate_gain(&pol, &m, &cfg, 8, &[0.0], None).unwrap();
    assert!(
        (est.mean - j.rho).abs() <= 3.0 * est.stderr + 2e-3,
        "{est:?} vs {}",
        j.rho
    );
    // A constant action cannot beat the optimum.
    let worst = evaluate_gain(&ConstantPolicy(vec![-1.0]), &m, &cfg, 8, &[0.0], None).unwrap();
    assert!(worst.mean <= j.rho + 3.0 * worst.stderr);
}

#[test]
fn greedy_policy_pushes_toward_the_reward() {
    // Reward concentrated at 0 with an action cost: far out, the drift
    // toward the origin must be reinforced.
    let m = linear_1d(
        -0.5,
        1.0,
        bump(0.0, ActionCost::Absolute { weight: 0.05 }),
        0.1,
        (-1.0, 1.0),
    );
    let g = Grid::new(1, 5.0, 0.05, &m.action_box, 33).unwrap();
    let sol = Arc::new(solve_diffusive(&m, &g, &opts()).unwrap());
    let pol = GreedyPolicy::new(sol.clone(), &m);
    for x in [-3.0, -2.0, -1.5, 1.5, 2.0, 3.0] {
        let a = pol.action(&[x], 1)[0];
        assert!(a * x < 0.0, "x={x} a={a}");
    }
    // Shifting w by a constant does not change decisions.
    let mut shifted = (*sol).clone();
    shifted.w.iter_mut().for_each(|v| *v += 12.5);
    let pol2 = GreedyPolicy::new(Arc::new(shifted), &m);
    for i in 0..40 {
        let x = -4.0 + 0.2 * i as f64;
        assert_eq!(pol.best_action(&[x]), pol2.best_action(&[x]));
    }
    assert_eq!(pol.clamped_queries(), 0);
    pol.best_action(&[50.0]);
    assert_eq!(pol.clamped_queries(), 1);
}

#[test]
fn single_action_policy_is_constant_and_has_no_suboptimality() {
    let m = linear_1d(-1.0, 1.0, bump(0.5, ActionCost::None), 0.2, (0.3, 0.3));
    let g = Grid::new(1, 5.0, 0.05, &m.action_box, 33).unwrap();
    let sol = Arc::new(solve_diffusive(&m, &g, &opts()).unwrap());
    let pol = GreedyPolicy::new(sol, &m);
    assert!((0..20).all(|i| pol.action(&[i as f64 * 0.3 - 3.0], 1) == vec![0.3]));
    let s = policy_suboptimality(&m, &g, &opts()).unwrap();
    assert!(s.value.abs() < 1e-8, "{s:?}");
}

#[test]
fn grid_too_small_is_refused() {
    let m = linear_1d(-1.0, 1.0, bump(0.0, ActionCost::None), 1.0, (-1.0, 1.0));
    let g = Grid::new(1, 0.5, 0.05, &m.action_box, 3).unwrap();
    assert!(matches!(
        solve_jump(&m, &g, &opts(), None),
        Err(ofu_diffusion::Error::GridTooSmall { .. })
    ));
}

#[test]
fn solution_files_round_trip() {
    let m = ModelSpec::benchmark_linear_1d(0.2);
    let g = Grid::new(1, 2.0, 0.5, &m.action_box, 3).unwrap();
    let sol = solve_diffusive(&m, &g, &opts()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    sol.write_files(dir.path(), "diffusive").unwrap();
    let csv = std::fs::read_to_string(dir.path().join("diffusive.csv")).unwrap();
    assert!(csv.starts_with("x_1,w,a_1\n"));
    assert_eq!(csv.lines().count(), g.len() + 1);
    let side: SolutionSidecar =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("diffusive.json")).unwrap())
            .unwrap();
    assert_eq!(side.rho, sol.rho);
    assert_eq!(side.iterations, sol.iterations);
}

#[test]
fn birth_death_balances_flux() {
    let up = [2.0, 1.5, 3.0, 0.0];
    let dn = [0.0, 1.0, 2.5, 0.7];
    let r = [0.3, -0.2, 1.0, 0.5];
    let (rho, d) = birth_death_evaluate(&up, &dn, &r);
    for i in 0..4 {
        let fwd = if i < 3 { d[i] } else { 0.0 };
        let bwd = if i > 0 { d[i - 1] } else { 0.0 };
        assert!((up[i] * fwd - dn[i] * bwd + r[i] - rho).abs() < 1e-13);
    }
}
