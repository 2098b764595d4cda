//! Monte Carlo frequency studies and the ε-sweep of planner gaps.

use super::regret::event_flags;
use crate::agent::{run, AgentConfig, PlannerCache};
use crate::error::Result;
use crate::learning::{clock_envelope, RadiusSchedule};
use crate::model::ModelSpec;
use crate::planning::{policy_suboptimality, Grid, SolverOptions};
use crate::process::{rollout, sample_arrivals, ClockConfig, Policy};
use crate::rng::replica_seed;
use crate::stats::binomial_sigma;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};

/// Empirical frequency of a bad event against `δ + 3σ`, σ the binomial
/// standard deviation at `p = δ`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FrequencyCheck {
    pub trials: usize,
    pub violations: usize,
    pub frequency: f64,
    pub delta: f64,
    pub threshold: f64,
}

impl FrequencyCheck {
    pub fn new(trials: usize, violations: usize, delta: f64) -> Self {
        Self {
            trials,
            violations,
            frequency: violations as f64 / trials.max(1) as f64,
            delta,
            threshold: delta + 3.0 * binomial_sigma(delta, trials),
        }
    }

    pub fn passed(&self) -> bool {
        self.trials > 0 && self.frequency <= self.threshold
    }
}

/// How often `|ε N_T - T|` leaves its envelope.
pub fn clock_study(
    epsilon: f64,
    horizon: f64,
    delta: f64,
    replicas: usize,
    seed: u64,
) -> Result<FrequencyCheck> {
    let envelope = clock_envelope(epsilon, horizon, delta);
    let bad: Vec<bool> = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let cfg = ClockConfig::new(epsilon, horizon, replica_seed(seed, r as u64))?;
            let n = sample_arrivals(&cfg)?.len();
            Ok((epsilon * n as f64 - horizon).abs() > envelope)
        })
        .collect::<Result<_>>()?;
    Ok(FrequencyCheck::new(
        replicas,
        bad.iter().filter(|b| **b).count(),
        delta,
    ))
}

/// How often a trajectory of `policy` reaches `‖X_n‖ ≥ H_δ(n)`.
pub fn state_bound_study(
    model: &ModelSpec,
    policy: &dyn Policy,
    horizon: f64,
    delta: f64,
    replicas: usize,
    seed: u64,
    x0: &[f64],
) -> Result<FrequencyCheck> {
    let lyap = model.family_lyapunov()?;
    let schedule = RadiusSchedule::new(model, &lyap, x0, delta);
    let bad: Vec<bool> = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let cfg = ClockConfig::new(model.epsilon, horizon, replica_seed(seed, r as u64))?;
            let out = rollout(policy, model, &cfg, x0, None)?;
            let log = &out.log;
            Ok((0..=log.n_events()).any(|n| {
                let x = log.state(n);
                x.iter().map(|v| v * v).sum::<f64>().sqrt() >= schedule.h(n)
            }))
        })
        .collect::<Result<_>>()?;
    Ok(FrequencyCheck::new(
        replicas,
        bad.iter().filter(|b| **b).count(),
        delta,
    ))
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CoverageStudy {
    /// Violations of coverage or of the state bound, jointly.
    pub joint: FrequencyCheck,
    pub coverage_failures: usize,
    pub bound_failures: usize,
    /// Runs that stopped early; counted as violations.
    pub aborted: usize,
}

impl CoverageStudy {
    /// Joint success frequency must reach `1 - δ - 3σ`.
    pub fn passed(&self) -> bool {
        self.joint.passed()
    }
}

/// Runs the full learning pipeline `replicas` times and checks, at level
/// `delta`, that θ* stays in every confidence set while the state stays
/// under `H_δ`.
pub fn coverage_study(
    model: &ModelSpec,
    agent: &AgentConfig,
    cache: &PlannerCache,
    horizon: f64,
    delta: f64,
    replicas: usize,
    seed: u64,
    stride: usize,
) -> Result<CoverageStudy> {
    let outcomes: Vec<(bool, bool, bool)> = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let cfg = ClockConfig::new(model.epsilon, horizon, replica_seed(seed, r as u64))?;
            let out = run(agent, model, &cfg, cache, None)?;
            let flags = event_flags(&out.log, model, delta, stride)?;
            let aborted = out.status != crate::agent::RunStatus::Completed;
            Ok((flags.coverage, flags.state_bound, aborted))
        })
        .collect::<Result<_>>()?;
    let coverage_failures = outcomes.iter().filter(|o| !o.0).count();
    let bound_failures = outcomes.iter().filter(|o| !o.1).count();
    let aborted = outcomes.iter().filter(|o| o.2).count();
    let joint = outcomes.iter().filter(|o| !(o.0 && o.1) || o.2).count();
    Ok(CoverageStudy {
        joint: FrequencyCheck::new(replicas, joint, delta),
        coverage_failures,
        bound_failures,
        aborted,
    })
}

/// Diffusive and jump gains at one ε, and the jump gain of the diffusive
/// greedy policy.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GapRow {
    pub epsilon: f64,
    pub rho_diffusive: f64,
    pub rho_jump: f64,
    /// `|ρ̄* - ρ*|`.
    pub gap: f64,
    pub rho_policy: f64,
    /// `ρ* - ρ^π̄`.
    pub suboptimality: f64,
    pub residual: f64,
}

pub fn gap_study(
    model: &ModelSpec,
    grid: &Grid,
    opts: &SolverOptions,
    epsilons: &[f64],
) -> Result<Vec<GapRow>> {
    epsilons
        .iter()
        .map(|&eps| {
            let m = model.with_epsilon(eps)?;
            let s = policy_suboptimality(&m, grid, opts)?;
            Ok(GapRow {
                epsilon: eps,
                rho_diffusive: s.rho_diffusive,
                rho_jump: s.rho_jump,
                gap: (s.rho_diffusive - s.rho_jump).abs(),
                rho_policy: s.rho_policy,
                suboptimality: s.value,
                residual: s.residual,
            })
        })
        .collect()
}

pub fn write_gap_csv<W: Write>(rows: &[GapRow], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for r in rows {
        wr.serialize(r)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_gap_csv<R: Read>(r: R) -> Result<Vec<GapRow>> {
    let mut rd = csv::Reader::from_reader(r);
    let rows = rd
        .deserialize()
        .collect::<std::result::Result<Vec<GapRow>, _>>()?;
    Ok(rows)
}
