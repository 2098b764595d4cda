use super::cache::PlannerCache;
use super::config::AgentConfig;
use super::optimism::{select_optimistic, Selection};
use super::trigger::LazyTrigger;
use crate::error::{Error, Result};
use crate::learning::{clock_envelope, ConfidenceState, RadiusSchedule};
use crate::model::ModelSpec;
use crate::planning::{GreedyPolicy, HjbSolution};
use crate::process::{fmt_f64, ClockConfig, EventLog, JumpEnv, Policy, RolloutStatus};
use serde::Serialize;
use std::io::Write;
use std::sync::Arc;

#[derive(Debug, Clone, Serialize)]
pub struct EpisodeRecord {
    pub k: usize,
    pub n_k: usize,
    pub tau: f64,
    pub theta_tilde: Vec<f64>,
    pub theta_hat: Vec<f64>,
    pub beta: f64,
    pub planner_rho: f64,
    pub rho_at_fit: Option<f64>,
    pub feasible_grid: usize,
    pub skipped: usize,
    /// Whether the true parameter lies in this episode's confidence set.
    pub truth_member: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct EventTelemetry {
    pub n: usize,
    pub k: usize,
    pub membership: bool,
    pub running_regret: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum RunStatus {
    Completed,
    Exploded {
        event: usize,
        norm: f64,
    },
    /// No candidate could be planned at an episode start.
    PlannerFailed {
        event: usize,
    },
}

pub struct AgentRun {
    pub log: EventLog,
    pub status: RunStatus,
    pub episodes: Vec<EpisodeRecord>,
    pub telemetry: Vec<EventTelemetry>,
    /// Episode in force when the action at event `n` was chosen; the action
    /// at event 0 is the initial control.
    pub episode_of: Vec<usize>,
    pub solutions: Vec<Arc<HjbSolution>>,
    pub initial_action: Vec<f64>,
    pub confidence: ConfidenceState,
    pub schedule: RadiusSchedule,
    /// Greedy queries that fell outside the planner grid.
    pub clamped_queries: usize,
}

impl AgentRun {
    pub fn switches(&self) -> usize {
        self.episodes.len().saturating_sub(1)
    }

    /// Parameter deployed at each event `0..=N`.
    pub fn theta_at(&self, n: usize) -> &[f64] {
        &self.episodes[self.episode_of[n]].theta_tilde
    }
}

/// Closed-loop optimistic learning against the system `model` (whose θ is
/// the unknown truth) on the clock `cfg`.
pub fn run(
    agent: &AgentConfig,
    model: &ModelSpec,
    cfg: &ClockConfig,
    cache: &PlannerCache,
    rho_star: Option<f64>,
) -> Result<AgentRun> {
    agent.validate(model)?;
    cfg.validate()?;
    let x0 = agent.x0(model);
    let lyap = model.family_lyapunov()?;
    let schedule = RadiusSchedule::new(model, &lyap, &x0, agent.delta / 3.0);
    let expected_events = ((cfg.horizon + clock_envelope(cfg.epsilon, cfg.horizon, agent.delta))
        / cfg.epsilon)
        .ceil();
    let cap = agent
        .explosion_cap
        .unwrap_or_else(|| 10.0 * schedule.h(expected_events as usize));
    let theta_grid = agent.theta_grid(model);
    let mut conf = ConfidenceState::new(model, schedule.clone(), agent.fit.clone());
    let mut env = JumpEnv::new(model, cfg, &x0, Some(cap))?;

    let mut episodes = Vec::new();
    let mut solutions = Vec::new();
    let mut policies: Vec<GreedyPolicy> = Vec::new();
    let start = |conf: &ConfidenceState,
                 n: usize,
                 tau: f64,
                 k: usize|
     -> Result<(EpisodeRecord, Selection)> {
        let sel =
            select_optimistic(conf, &theta_grid, cache, model).ok_or(Error::NonConvergence {
                solver: "optimistic planner",
                iterations: n,
                residual: f64::NAN,
                history: vec![],
            })?;
        let rec = EpisodeRecord {
            k,
            n_k: n,
            tau,
            theta_tilde: sel.theta.clone(),
            theta_hat: conf.theta_hat.clone(),
            beta: conf.beta,
            planner_rho: sel.solution.rho,
            rho_at_fit: sel.rho_at_fit,
            feasible_grid: sel.feasible_grid,
            skipped: sel.skipped,
            truth_member: conf.contains(&model.theta),
        };
        Ok((rec, sel))
    };

    let (rec, sel) = start(&conf, 0, 0.0, 0)?;
    let mut trigger = LazyTrigger::new(&conf, &theta_grid);
    policies.push(GreedyPolicy::new(sel.solution.clone(), model));
    solutions.push(sel.solution);
    episodes.push(rec);

    let initial_action = agent.initial_action(model);
    let mut episode_of = vec![0usize];
    let mut telemetry = Vec::new();
    let mut status = RunStatus::Completed;
    let mut reward_sum = 0.0;
    env.act(&initial_action)?;
    let mut a = vec![0.0; model.action_dim()];
    let mut x = vec![0.0; model.state_dim()];
    while !env.is_done() {
        let n = env.event();
        {
            let log = env.log();
            conf.observe(log.state(n - 1), log.action(n - 1), log.state(n));
            trigger.observe(
                &model.family,
                model.epsilon,
                log.state(n - 1),
                log.action(n - 1),
            );
        }
        if trigger.fires(schedule.beta(n)) {
            conf.refit()?;
            match start(&conf, n, env.time(), episodes.len()) {
                Ok((rec, sel)) => {
                    trigger = LazyTrigger::new(&conf, &theta_grid);
                    policies.push(GreedyPolicy::new(sel.solution.clone(), model));
                    solutions.push(sel.solution);
                    episodes.push(rec);
                }
                Err(_) => {
                    status = RunStatus::PlannerFailed { event: n };
                    break;
                }
            }
        }
        let k = episodes.len() - 1;
        x.copy_from_slice(env.state());
        policies[k].action_into(&x, &mut a);
        episode_of.push(k);
        reward_sum += env.act(&a)?;
        telemetry.push(EventTelemetry {
            n,
            k,
            membership: episodes[k].truth_member,
            running_regret: rho_star.map(|r| env.log().arrivals[n] * r - reward_sum),
        });
    }
    let clamped_queries = policies.iter().map(GreedyPolicy::clamped_queries).sum();
    let (log, env_status) = env.finish();
    if let RolloutStatus::Exploded { event, norm } = env_status {
        status = RunStatus::Exploded { event, norm };
    }
    Ok(AgentRun {
        log,
        status,
        episodes,
        telemetry,
        episode_of,
        solutions,
        initial_action,
        confidence: conf,
        schedule,
        clamped_queries,
    })
}

/// Events whose logged action differs from the episode policy evaluated at
/// the logged state.
pub fn replay_mismatches(run: &AgentRun, model: &ModelSpec) -> usize {
    let policies: Vec<GreedyPolicy> = run
        .solutions
        .iter()
        .map(|s| GreedyPolicy::new(s.clone(), model))
        .collect();
    let rows = run.log.actions.len() / run.log.action_dim;
    (1..rows.min(run.episode_of.len()))
        .filter(|&n| {
            policies[run.episode_of[n]].action(run.log.state(n), run.log.action_dim)
                != run.log.action(n)
        })
        .count()
}

pub fn write_episodes_csv<W: Write>(episodes: &[EpisodeRecord], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let p = episodes.first().map_or(0, |e| e.theta_tilde.len());
    let mut header = vec!["k".to_string(), "n_k".into(), "tau_n_k".into()];
    header.extend((1..=p).map(|j| format!("theta_tilde_{j}")));
    header.push("planner_rho".into());
    header.push("beta".into());
    wr.write_record(&header)?;
    for e in episodes {
        let mut rec = vec![e.k.to_string(), e.n_k.to_string(), fmt_f64(e.tau)];
        rec.extend(e.theta_tilde.iter().map(|v| fmt_f64(*v)));
        rec.push(fmt_f64(e.planner_rho));
        rec.push(fmt_f64(e.beta));
        wr.write_record(&rec)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn write_telemetry_csv<W: Write>(rows: &[EventTelemetry], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["n", "k", "membership", "running_regret"])?;
    for r in rows {
        wr.write_record([
            r.n.to_string(),
            r.k.to_string(),
            u8::from(r.membership).to_string(),
            r.running_regret.map_or_else(String::new, fmt_f64),
        ])?;
    }
    wr.flush()?;
    Ok(())
}
