//! Realized regret, its five-term decomposition and the high-probability
//! events the analysis conditions on.

use crate::agent::AgentRun;
use crate::error::{invalid, Result};
use crate::learning::{clock_envelope, ConfidenceState, FitOptions, LearningRow, RadiusSchedule};
use crate::model::ModelSpec;
use crate::planning::{
    evaluate_policy_jump, solve_diffusive, solve_jump, Grid, HjbSolution, JumpOperator,
    SolverOptions,
};
use crate::process::EventLog;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize)]
pub struct RegretReport {
    pub horizon: f64,
    pub events: usize,
    pub rho_star: f64,
    pub reward_sum: f64,
    /// `T ρ* - Σ rₙ`.
    pub regret: f64,
    pub decomposition: Option<Decomposition>,
    pub flags: Option<EventFlags>,
}

impl RegretReport {
    /// `|regret + Σ rₙ - T ρ*|`, which should be at rounding level.
    pub fn identity_error(&self) -> f64 {
        (self.regret + self.reward_sum - self.horizon * self.rho_star).abs()
    }

    /// A few ulps of the largest quantity in the identity.
    pub fn identity_tolerance(&self) -> f64 {
        let scale = (self.horizon * self.rho_star)
            .abs()
            .max(self.reward_sum.abs())
            .max(self.regret.abs());
        4.0 * f64::EPSILON * scale.max(f64::MIN_POSITIVE)
    }
}

/// Regret of a logged trajectory against the optimal gain `rho_star`.
pub fn compute_regret(log: &EventLog, rho_star: f64) -> RegretReport {
    let reward_sum = log.reward_sum();
    RegretReport {
        horizon: log.horizon,
        events: log.n_events(),
        rho_star,
        reward_sum,
        regret: log.horizon * rho_star - reward_sum,
        decomposition: None,
        flags: None,
    }
}

/// Reference optimal gain: the jump HJB at the true parameter, warm
/// started from the diffusive solution on the same grid.
pub fn reference_solution(
    model: &ModelSpec,
    grid: &Grid,
    opts: &SolverOptions,
) -> Result<HjbSolution> {
    let diff = solve_diffusive(model, grid, opts)?;
    solve_jump(model, grid, opts, Some(&diff.w))
}

/// Outcome of the clock, state-bound and coverage events on one run.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EventFlags {
    /// `|ε N_T - T|` within the clock envelope.
    pub clock: bool,
    /// `‖X_n‖ < H_δ(n)` at every event.
    pub state_bound: bool,
    /// θ* in every confidence set along the run.
    pub coverage: bool,
    pub max_state_ratio: f64,
    pub first_coverage_failure: Option<usize>,
}

impl EventFlags {
    pub fn all(&self) -> bool {
        self.clock && self.state_bound && self.coverage
    }
}

/// Checks the three events at level `delta` each. Confidence sets are refit
/// every `stride` events and at the last one; `stride = 1` checks all `n`.
pub fn event_flags(
    log: &EventLog,
    model: &ModelSpec,
    delta: f64,
    stride: usize,
) -> Result<EventFlags> {
    if !(delta > 0.0 && delta < 1.0) {
        return invalid("delta must lie in (0, 1)");
    }
    let lyap = model.family_lyapunov()?;
    let schedule = RadiusSchedule::new(model, &lyap, log.state(0), delta);
    let n_events = log.n_events();
    let clock = (model.epsilon * n_events as f64 - log.horizon).abs()
        <= clock_envelope(model.epsilon, log.horizon, delta);
    let max_state_ratio = (0..=n_events)
        .map(|n| norm(log.state(n)) / schedule.h(n))
        .fold(0.0, f64::max);
    let first_coverage_failure = coverage_along(log, model, schedule, stride)?;
    Ok(EventFlags {
        clock,
        state_bound: max_state_ratio < 1.0,
        coverage: first_coverage_failure.is_none(),
        max_state_ratio,
        first_coverage_failure,
    })
}

/// First event at which θ* leaves the confidence set built from the logged
/// transitions, if any.
pub fn coverage_along(
    log: &EventLog,
    model: &ModelSpec,
    schedule: RadiusSchedule,
    stride: usize,
) -> Result<Option<usize>> {
    let stride = stride.max(1);
    let steps = log.n_events().min(log.actions.len() / log.action_dim);
    let mut conf = ConfidenceState::new(model, schedule, FitOptions::default());
    for n in 1..=steps {
        conf.observe(log.state(n - 1), log.action(n - 1), log.state(n));
        if n % stride == 0 || n == steps {
            conf.refit()?;
            if !conf.contains(&model.theta) {
                return Ok(Some(n));
            }
        }
    }
    Ok(None)
}

/// Confidence-set telemetry replayed from a log: one row every `stride`
/// events and at the last one.
pub fn learning_trace(
    log: &EventLog,
    model: &ModelSpec,
    schedule: RadiusSchedule,
    stride: usize,
) -> Result<Vec<LearningRow>> {
    let stride = stride.max(1);
    let steps = log.n_events().min(log.actions.len() / log.action_dim);
    let mut conf = ConfidenceState::new(model, schedule, FitOptions::default());
    let mut rows = vec![conf.row(&model.theta)];
    for n in 1..=steps {
        conf.observe(log.state(n - 1), log.action(n - 1), log.state(n));
        if n % stride == 0 || n == steps {
            conf.refit()?;
            rows.push(conf.row(&model.theta));
        }
    }
    Ok(rows)
}

/// Regret split into clock deviation (`r1`), gain and local HJB error
/// (`r2`), prediction error (`r3`), switching (`r4`) and the martingale
/// remainder (`r5`).
///
/// With `W_n` the value function deployed at event `n`, `Q` the expectation
/// over the next mark and `X̃_{n+1}` the step the deployed model predicts,
/// the local error `e_n` is defined by
/// `ε ρ^π_n = Q[W_n(X̃_{n+1})] - W_n(X_n) + r_n + e_n`, which makes the
/// sum of the five terms equal the regret up to rounding.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Decomposition {
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
    pub r4: f64,
    pub r5: f64,
    /// `ε Σ (ρ* - ρ^π_n)`, the gain part of `r2`.
    pub r2_gain: f64,
    /// `Σ e_n`, the local part of `r2`.
    pub r2_local: f64,
    pub max_local_error: f64,
    /// `L_W Σ ‖μ_θn - μ_θ*‖`.
    pub r3_bound: f64,
    /// `2 L_W (1 + max ‖X‖)` per switch.
    pub r4_bound: f64,
    /// Largest measured slope among deployed value functions.
    pub lipschitz: f64,
    pub switches: usize,
    /// `|regret - Σ rᵢ|`.
    pub reconstruction_gap: f64,
    /// Rounding allowance for the summation.
    pub budget: f64,
    /// Gain of each episode policy under the jump dynamics of its own
    /// parameter.
    pub episode_gains: Vec<f64>,
}

impl Decomposition {
    pub fn total(&self) -> f64 {
        self.r1 + self.r2 + self.r3 + self.r4 + self.r5
    }

    pub fn reconstructs(&self) -> bool {
        self.reconstruction_gap <= self.budget
    }
}

/// Decomposes the regret of an agent run. `model` is the true system;
/// conditional expectations use the Gauss–Hermite rule of the jump planner.
pub fn decompose_regret(
    run: &AgentRun,
    model: &ModelSpec,
    rho_star: f64,
    opts: &SolverOptions,
) -> Result<Decomposition> {
    let log = &run.log;
    let steps = log
        .n_events()
        .min(log.rewards.len())
        .min(run.episode_of.len().saturating_sub(1));
    if run.solutions.len() != run.episodes.len() {
        return invalid("every episode needs its deployed solution");
    }
    let d = model.state_dim();
    let eps = model.epsilon;

    let mut operators = Vec::with_capacity(run.solutions.len());
    let mut gains = Vec::with_capacity(run.solutions.len());
    for sol in &run.solutions {
        operators.push(JumpOperator::new(model, &sol.grid));
        let deployed = model.with_theta(&sol.theta);
        gains
            .push(evaluate_policy_jump(&deployed, &sol.grid, &sol.policy, opts, Some(&sol.w))?.rho);
    }
    let lipschitz = run
        .solutions
        .iter()
        .map(|s| s.lipschitz_estimate)
        .fold(0.0, f64::max);

    let mut mu_n = vec![0.0; d];
    let mut mu_star = vec![0.0; d];
    let mut mean_cf = vec![0.0; d];
    let mut mean = vec![0.0; d];
    let (mut r2_gain, mut r2_local, mut r3, mut r4, mut r5) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let (mut r3_bound, mut max_local, mut magnitude) = (0.0, 0.0f64, 0.0);
    let mut switches = 0;
    for n in 1..=steps {
        let k = run.episode_of[n];
        let k_next = run.episode_of.get(n + 1).copied().unwrap_or(k);
        let sol = &run.solutions[k];
        let (x, a, r) = (log.state(n), log.action(n), log.reward(n));
        model.family.drift_bar_into(&sol.theta, x, a, &mut mu_n);
        model.drift_bar_into(x, a, &mut mu_star);
        for j in 0..d {
            mean_cf[j] = x[j] + eps * mu_n[j];
            mean[j] = x[j] + eps * mu_star[j];
        }
        let w_x = sol.grid.interpolate(&sol.w, x);
        let q_cf = operators[k].expect(&sol.w, &mean_cf);
        let q_true = operators[k].expect(&sol.w, &mean);
        let q_switch = if k_next == k {
            q_true
        } else {
            switches += 1;
            let next = &run.solutions[k_next];
            operators[k_next].expect(&next.w, &mean)
        };
        let local = eps * gains[k] - (q_cf - w_x + r);
        max_local = max_local.max(local.abs());
        r2_gain += eps * (rho_star - gains[k]);
        r2_local += local;
        r3 += q_cf - q_true;
        r4 += q_true - q_switch;
        r5 += q_switch - w_x;
        r3_bound += lipschitz * eps * norm_diff(&mu_n, &mu_star);
        magnitude += q_cf.abs()
            + q_true.abs()
            + q_switch.abs()
            + w_x.abs()
            + r.abs()
            + eps * (gains[k].abs() + rho_star.abs());
    }
    let r1 = (log.horizon - eps * steps as f64) * rho_star;
    let regret = log.horizon * rho_star - log.rewards[..steps].iter().sum::<f64>();
    let r2 = r2_gain + r2_local;
    let total = r1 + r2 + r3 + r4 + r5;
    // Naive summation of `steps` terms of this magnitude.
    let budget = (steps as f64 + 16.0)
        * f64::EPSILON
        * (magnitude + regret.abs() + (log.horizon * rho_star).abs());
    Ok(Decomposition {
        r1,
        r2,
        r3,
        r4,
        r5,
        r2_gain,
        r2_local,
        max_local_error: max_local,
        r3_bound,
        r4_bound: 2.0 * lipschitz * (1.0 + log.max_state_norm()) * switches as f64,
        lipschitz,
        switches,
        reconstruction_gap: (regret - total).abs(),
        budget,
        episode_gains: gains,
    })
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn norm_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(u, v)| (u - v) * (u - v))
        .sum::<f64>()
        .sqrt()
}
