use super::diffusive::solve_diffusive;
use super::grid::Grid;
use super::jump::{evaluate_policy_jump, solve_jump, JumpOperator};
use super::solution::{HjbSolution, SolverKind, SolverOptions};
use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::process::{rollout, ClockConfig, Policy, RolloutStatus};
use crate::rng::replica_seed;
use crate::stats;
use rayon::prelude::*;
use serde::Serialize;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

/// Total state-feedback map built from a solution: the nearest node supplies
/// the value differences and the action argmax is re-evaluated at the query
/// point itself. Ties go to the lowest action index. Queries outside the
/// grid use the boundary node and are counted.
pub struct GreedyPolicy {
    solution: Arc<HjbSolution>,
    model: ModelSpec,
    jump: Option<JumpOperator>,
    clamped: AtomicUsize,
}

impl GreedyPolicy {
    /// `model` supplies the reward and noise; the drift parameter is taken
    /// from the solution.
    pub fn new(solution: Arc<HjbSolution>, model: &ModelSpec) -> Self {
        let model = model.with_theta(&solution.theta);
        let jump = (solution.kind == SolverKind::Jump).then(|| {
            let m = model
                .with_epsilon(solution.epsilon)
                .unwrap_or_else(|_| model.clone());
            JumpOperator::new(&m, &solution.grid)
        });
        Self {
            solution,
            model,
            jump,
            clamped: AtomicUsize::new(0),
        }
    }

    pub fn solution(&self) -> &Arc<HjbSolution> {
        &self.solution
    }

    pub fn clamped_queries(&self) -> usize {
        self.clamped.load(Ordering::Relaxed)
    }

    /// Index of the greedy action at `x`.
    pub fn best_action(&self, x: &[f64]) -> usize {
        let sol = &*self.solution;
        let grid = &sol.grid;
        let (node, clamped) = grid.nearest(x);
        if clamped {
            self.clamped.fetch_add(1, Ordering::Relaxed);
        }
        if sol.kind == SolverKind::PolicyEvaluation {
            return sol.policy[node];
        }
        let d = grid.dim;
        let mut mu = [0.0; 2];
        let mut mean = [0.0; 2];
        let mut best = (f64::NEG_INFINITY, 0);
        for (a, act) in grid.actions.iter().enumerate() {
            self.model.drift_bar_into(x, act, &mut mu[..d]);
            let r = self.model.reward_bar(x, act);
            let v = match &self.jump {
                Some(op) => {
                    for k in 0..d {
                        mean[k] = x[k] + sol.epsilon * mu[k];
                    }
                    op.expect(&sol.w, &mean[..d]) + sol.epsilon * r
                }
                None => diffusive_hamiltonian(grid, &sol.w, node, &mu[..d]) + r,
            };
            if v > best.0 {
                best = (v, a);
            }
        }
        best.1
    }
}

/// Upwind drift part `Σₖ bₖ⁺ ∂ₖ⁺w - bₖ⁻ ∂ₖ⁻w` at a node.
fn diffusive_hamiltonian(grid: &Grid, w: &[f64], node: usize, b: &[f64]) -> f64 {
    let n = grid.axis_len();
    let idx = grid.unflat(node);
    let stride = |k: usize| if grid.dim == 1 || k == 1 { 1 } else { n };
    let mut acc = 0.0;
    for (k, bk) in b.iter().enumerate() {
        let s = stride(k);
        if *bk > 0.0 && idx[k] + 1 < n {
            acc += bk * (w[node + s] - w[node]) / grid.spacing;
        } else if *bk < 0.0 && idx[k] > 0 {
            acc += bk * (w[node] - w[node - s]) / grid.spacing;
        }
    }
    acc
}

impl Policy for GreedyPolicy {
    fn action_into(&self, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.solution.grid.actions[self.best_action(x)]);
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GainEstimate {
    pub mean: f64,
    pub stderr: f64,
    /// Average reward per unit time of each replica.
    pub replicas: Vec<f64>,
}

/// Monte Carlo long-run average reward `(1/T) Σ rₙ`. With several replicas
/// the standard error is across replicas; a single replica uses batch
/// means over its events.
pub fn evaluate_gain(
    policy: &dyn Policy,
    model: &ModelSpec,
    cfg: &ClockConfig,
    replicas: usize,
    x0: &[f64],
    cap: Option<f64>,
) -> Result<GainEstimate> {
    cfg.validate()?;
    let runs: Vec<Result<(f64, Vec<f64>)>> = (0..replicas.max(1))
        .into_par_iter()
        .map(|r| {
            let c = ClockConfig {
                seed: replica_seed(cfg.seed, r as u64),
                ..cfg.clone()
            };
            let out = rollout(policy, model, &c, x0, cap)?;
            if let RolloutStatus::Exploded { event, norm } = out.status {
                return Err(Error::ModelFault(format!(
                    "rollout exploded at event {event} (norm {norm:.3e})"
                )));
            }
            Ok((out.log.reward_sum() / cfg.horizon, out.log.rewards.clone()))
        })
        .collect();
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    let values: Vec<f64> = runs.iter().map(|r| r.0).collect();
    let stderr = if values.len() >= 2 {
        stats::std_err(&values)
    } else {
        let rewards = &runs[0].1;
        stats::batch_mean_stderr(rewards, 20) * rewards.len() as f64 / cfg.horizon
    };
    Ok(GainEstimate {
        mean: stats::mean(&values),
        stderr,
        replicas: values,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Suboptimality {
    pub rho_diffusive: f64,
    pub rho_jump: f64,
    /// Gain of the diffusive greedy policy under jump dynamics.
    pub rho_policy: f64,
    /// `rho_jump - rho_policy`.
    pub value: f64,
    pub residual: f64,
}

/// Loss of deploying the diffusive greedy policy in the jump system,
/// with the policy gain computed by fixed-policy relative value iteration
/// on the grid.
pub fn policy_suboptimality(
    model: &ModelSpec,
    grid: &Grid,
    opts: &SolverOptions,
) -> Result<Suboptimality> {
    let diff = solve_diffusive(model, grid, opts)?;
    let jump = solve_jump(model, grid, opts, Some(&diff.w))?;
    let eval = evaluate_policy_jump(model, grid, &diff.policy, opts, Some(&jump.w))?;
    Ok(Suboptimality {
        rho_diffusive: diff.rho,
        rho_jump: jump.rho,
        rho_policy: eval.rho,
        value: jump.rho - eval.rho,
        residual: diff.residual.max(jump.residual).max(eval.residual),
    })
}

/// Monte Carlo variant: the greedy policy is simulated instead of
/// evaluated on the grid. Returns `(ρ* - mean, stderr)`.
pub fn policy_suboptimality_mc(
    model: &ModelSpec,
    grid: &Grid,
    opts: &SolverOptions,
    cfg: &ClockConfig,
    replicas: usize,
    x0: &[f64],
) -> Result<(f64, f64)> {
    let diff = Arc::new(solve_diffusive(model, grid, opts)?);
    let jump = solve_jump(model, grid, opts, Some(&diff.w))?;
    let policy = GreedyPolicy::new(diff, model);
    let gain = evaluate_gain(&policy, model, cfg, replicas, x0, None)?;
    Ok((jump.rho - gain.mean, gain.stderr))
}
