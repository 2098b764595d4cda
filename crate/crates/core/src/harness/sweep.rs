//! Seeded `(ε, T, seed)` sweeps of the learning agent and its oracle.

use super::regret::{compute_regret, decompose_regret, event_flags, reference_solution};
use crate::agent::{run, AgentConfig, PlannerCache, RunStatus};
use crate::error::{invalid, Result};
use crate::learning::{clock_envelope, RadiusSchedule};
use crate::model::{ModelConfig, ModelSpec, ParamBox};
use crate::planning::{Grid, GridConfig, SolverOptions};
use crate::process::ClockConfig;
use crate::stats;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

/// Grid and solver for the reference gain `ρ*`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReferenceConfig {
    pub grid: GridConfig,
    pub solver: SolverOptions,
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        Self {
            grid: GridConfig {
                radius: Some(6.0),
                spacing: 0.02,
                actions_per_axis: 33,
            },
            solver: SolverOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub epsilons: Vec<f64>,
    pub horizons: Vec<f64>,
    pub seeds: Vec<u64>,
    /// Also run the agent that knows θ* (same seeds).
    pub oracle: bool,
    /// Compute the five-term regret decomposition for every run.
    pub decompose: bool,
    /// Refit interval when checking coverage along a run.
    pub coverage_stride: usize,
    pub output: Option<PathBuf>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            epsilons: vec![0.2, 0.05],
            horizons: vec![500.0, 2000.0, 8000.0],
            seeds: (0..20).collect(),
            oracle: true,
            decompose: false,
            coverage_stride: 1,
            output: None,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epsilons.is_empty() || self.horizons.is_empty() || self.seeds.is_empty() {
            return invalid("sweep lists must be nonempty");
        }
        if self.epsilons.iter().any(|e| !(*e > 0.0 && *e <= 1.0)) {
            return invalid("sweep epsilons must lie in (0, 1]");
        }
        if self.horizons.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
            return invalid("sweep horizons must be positive");
        }
        Ok(())
    }

    /// Cells in `(ε, T, seed)` order.
    pub fn cells(&self) -> Vec<(f64, f64, u64)> {
        let mut out =
            Vec::with_capacity(self.epsilons.len() * self.horizons.len() * self.seeds.len());
        for &e in &self.epsilons {
            for &t in &self.horizons {
                for &s in &self.seeds {
                    out.push((e, t, s));
                }
            }
        }
        out
    }
}

/// Everything a command needs: the true system, the agent, the reference
/// planner and the sweep grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub agent: AgentConfig,
    pub reference: ReferenceConfig,
    pub sweep: SweepConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let agent = AgentConfig {
            planner: GridConfig {
                radius: Some(6.0),
                spacing: 0.05,
                actions_per_axis: 33,
            },
            ..AgentConfig::default()
        };
        Self {
            model: ModelConfig::benchmark(),
            agent,
            reference: ReferenceConfig::default(),
            sweep: SweepConfig::default(),
        }
    }
}

/// Planner grid radius when none is configured: `1.5 H_{δ/3}(N)` at the
/// clock envelope's upper event count.
pub fn default_radius(model: &ModelSpec, agent: &AgentConfig, horizon: f64) -> Result<f64> {
    let lyap = model.family_lyapunov()?;
    let x0 = agent.x0(model);
    let schedule = RadiusSchedule::new(model, &lyap, &x0, agent.delta / 3.0);
    let n =
        ((horizon + clock_envelope(model.epsilon, horizon, agent.delta)) / model.epsilon).ceil();
    Ok(1.5 * schedule.h(n as usize))
}

/// Agent planner grid shared by every cell of a sweep.
pub fn planner_grid(model: &ModelSpec, agent: &AgentConfig, sweep: &SweepConfig) -> Result<Grid> {
    let mut radius = 0.0f64;
    if agent.planner.radius.is_none() {
        for &e in &sweep.epsilons {
            for &t in &sweep.horizons {
                radius = radius.max(default_radius(&model.with_epsilon(e)?, agent, t)?);
            }
        }
    }
    Grid::for_model(model, &agent.planner, radius)
}

/// The same system with Θ collapsed to `{θ*}`.
pub fn oracle_model(model: &ModelSpec) -> ModelSpec {
    let mut m = model.clone();
    m.theta_bounds = ParamBox {
        lo: model.theta.clone(),
        hi: model.theta.clone(),
    };
    m
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub epsilon: f64,
    pub horizon: f64,
    pub seed: u64,
    pub status: String,
    pub events: Option<usize>,
    pub rho_star: f64,
    pub reward_sum: Option<f64>,
    pub regret: Option<f64>,
    pub regret_per_time: Option<f64>,
    pub episodes: Option<usize>,
    pub clock: Option<bool>,
    pub state_bound: Option<bool>,
    pub coverage: Option<bool>,
    pub oracle_regret: Option<f64>,
    pub r1: Option<f64>,
    pub r2: Option<f64>,
    pub r3: Option<f64>,
    pub r4: Option<f64>,
    pub r5: Option<f64>,
    pub reconstruction_gap: Option<f64>,
    pub budget: Option<f64>,
}

impl RunRow {
    fn failed(epsilon: f64, horizon: f64, seed: u64, rho_star: f64, status: String) -> Self {
        Self {
            epsilon,
            horizon,
            seed,
            status,
            events: None,
            rho_star,
            reward_sum: None,
            regret: None,
            regret_per_time: None,
            episodes: None,
            clock: None,
            state_bound: None,
            coverage: None,
            oracle_regret: None,
            r1: None,
            r2: None,
            r3: None,
            r4: None,
            r5: None,
            reconstruction_gap: None,
            budget: None,
        }
    }

    pub fn completed(&self) -> bool {
        self.status == "completed"
    }

    /// Any of the three events failed.
    pub fn event_violation(&self) -> Option<bool> {
        Some(!(self.clock? && self.state_bound? && self.coverage?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub epsilon: f64,
    pub horizon: f64,
    pub runs: usize,
    pub completed: usize,
    pub median_regret: Option<f64>,
    pub iqr_regret: Option<f64>,
    pub median_regret_per_time: Option<f64>,
    pub median_episodes: Option<f64>,
    pub median_events: Option<f64>,
    pub event_violation_frequency: Option<f64>,
    pub coverage_frequency: Option<f64>,
    pub oracle_median_regret: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub runs: Vec<RunRow>,
    pub summary: Vec<SummaryRow>,
    /// `(ε, ρ*)` per sweep ε.
    pub rho_star: Vec<(f64, f64)>,
}

/// Shared state of one sweep: reference gains and the planner cache.
pub struct SweepContext {
    pub model: ModelSpec,
    pub agent: AgentConfig,
    pub cache: PlannerCache,
    pub rho_star: Vec<(f64, f64)>,
    pub solver: SolverOptions,
}

impl SweepContext {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.sweep.validate()?;
        let model = cfg.model.build()?;
        cfg.agent.validate(&model)?;
        let reference_grid = Grid::for_model(&model, &cfg.reference.grid, 6.0)?;
        let rho_star = cfg
            .sweep
            .epsilons
            .iter()
            .map(|&e| {
                Ok((
                    e,
                    reference_solution(
                        &model.with_epsilon(e)?,
                        &reference_grid,
                        &cfg.reference.solver,
                    )?
                    .rho,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        let grid = planner_grid(&model, &cfg.agent, &cfg.sweep)?;
        Ok(Self {
            model,
            agent: cfg.agent.clone(),
            cache: PlannerCache::new(grid, cfg.agent.solver),
            rho_star,
            solver: cfg.reference.solver,
        })
    }

    pub fn rho_star(&self, epsilon: f64) -> Option<f64> {
        self.rho_star
            .iter()
            .find(|(e, _)| *e == epsilon)
            .map(|p| p.1)
    }

    /// One cell of the sweep; failures become a row with a status.
    pub fn run_cell(&self, sweep: &SweepConfig, epsilon: f64, horizon: f64, seed: u64) -> RunRow {
        let rho_star = self.rho_star(epsilon).unwrap_or(f64::NAN);
        match self.try_cell(sweep, epsilon, horizon, seed, rho_star) {
            Ok(row) => row,
            Err(e) => RunRow::failed(epsilon, horizon, seed, rho_star, format!("error: {e}")),
        }
    }

    fn try_cell(
        &self,
        sweep: &SweepConfig,
        epsilon: f64,
        horizon: f64,
        seed: u64,
        rho_star: f64,
    ) -> Result<RunRow> {
        let model = self.model.with_epsilon(epsilon)?;
        let clock = ClockConfig::new(epsilon, horizon, seed)?;
        let out = run(&self.agent, &model, &clock, &self.cache, None)?;
        let status = match &out.status {
            RunStatus::Completed => "completed".to_string(),
            RunStatus::Exploded { .. } => "exploded".to_string(),
            RunStatus::PlannerFailed { .. } => "planner_failed".to_string(),
        };
        let mut row = RunRow::failed(epsilon, horizon, seed, rho_star, status);
        row.events = Some(out.log.n_events());
        row.episodes = Some(out.episodes.len());
        if out.status != RunStatus::Completed {
            return Ok(row);
        }
        let report = compute_regret(&out.log, rho_star);
        let flags = event_flags(
            &out.log,
            &model,
            self.agent.delta / 3.0,
            sweep.coverage_stride,
        )?;
        row.reward_sum = Some(report.reward_sum);
        row.regret = Some(report.regret);
        row.regret_per_time = Some(report.regret / horizon);
        row.clock = Some(flags.clock);
        row.state_bound = Some(flags.state_bound);
        row.coverage = Some(flags.coverage);
        if sweep.decompose {
            let dec = decompose_regret(&out, &model, rho_star, &self.solver)?;
            row.r1 = Some(dec.r1);
            row.r2 = Some(dec.r2);
            row.r3 = Some(dec.r3);
            row.r4 = Some(dec.r4);
            row.r5 = Some(dec.r5);
            row.reconstruction_gap = Some(dec.reconstruction_gap);
            row.budget = Some(dec.budget);
        }
        if sweep.oracle {
            let oracle = oracle_model(&model);
            let agent = AgentConfig {
                theta_grid_points: 1,
                ..self.agent.clone()
            };
            let o = run(&agent, &oracle, &clock, &self.cache, None)?;
            if o.status == RunStatus::Completed {
                row.oracle_regret = Some(compute_regret(&o.log, rho_star).regret);
            }
        }
        Ok(row)
    }
}

pub fn sweep(cfg: &ExperimentConfig) -> Result<SweepResult> {
    let ctx = SweepContext::new(cfg)?;
    let runs: Vec<RunRow> = cfg
        .sweep
        .cells()
        .into_par_iter()
        .map(|(e, t, s)| ctx.run_cell(&cfg.sweep, e, t, s))
        .collect();
    let summary = summarize(&cfg.sweep, &runs);
    Ok(SweepResult {
        runs,
        summary,
        rho_star: ctx.rho_star,
    })
}

/// Median and IQR statistics per `(ε, T)` cell over completed runs.
pub fn summarize(sweep: &SweepConfig, runs: &[RunRow]) -> Vec<SummaryRow> {
    let mut out = Vec::new();
    for &e in &sweep.epsilons {
        for &t in &sweep.horizons {
            let cell: Vec<&RunRow> = runs
                .iter()
                .filter(|r| r.epsilon == e && r.horizon == t)
                .collect();
            let done: Vec<&RunRow> = cell.iter().copied().filter(|r| r.completed()).collect();
            let col = |f: &dyn Fn(&RunRow) -> Option<f64>| -> Vec<f64> {
                done.iter().filter_map(|r| f(r)).collect()
            };
            let med = |v: Vec<f64>| (!v.is_empty()).then(|| stats::median(&v));
            let freq = |v: Vec<f64>| (!v.is_empty()).then(|| stats::mean(&v));
            let regrets = col(&|r| r.regret);
            out.push(SummaryRow {
                epsilon: e,
                horizon: t,
                runs: cell.len(),
                completed: done.len(),
                iqr_regret: (!regrets.is_empty()).then(|| stats::iqr(&regrets)),
                median_regret: med(regrets),
                median_regret_per_time: med(col(&|r| r.regret_per_time)),
                median_episodes: med(col(&|r| r.episodes.map(|k| k as f64))),
                median_events: med(col(&|r| r.events.map(|k| k as f64))),
                event_violation_frequency: freq(col(&|r| r.event_violation().map(f64::from))),
                coverage_frequency: freq(col(&|r| r.coverage.map(f64::from))),
                oracle_median_regret: med(col(&|r| r.oracle_regret)),
            });
        }
    }
    out
}

pub fn write_rows<T: Serialize, W: Write>(rows: &[T], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for r in rows {
        wr.serialize(r)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_rows<T: serde::de::DeserializeOwned, R: Read>(r: R) -> Result<Vec<T>> {
    let mut rd = csv::Reader::from_reader(r);
    let rows = rd
        .deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()?;
    Ok(rows)
}

/// Writes `runs.csv`, `summary.csv`, `reference.csv` and `config.json`
/// into `dir`.
pub fn write_sweep(dir: &Path, cfg: &ExperimentConfig, result: &SweepResult) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_rows(&result.runs, std::fs::File::create(dir.join("runs.csv"))?)?;
    write_rows(
        &result.summary,
        std::fs::File::create(dir.join("summary.csv"))?,
    )?;
    #[derive(Serialize)]
    struct Reference {
        epsilon: f64,
        rho_star: f64,
    }
    let reference: Vec<Reference> = result
        .rho_star
        .iter()
        .map(|&(epsilon, rho_star)| Reference { epsilon, rho_star })
        .collect();
    write_rows(
        &reference,
        std::fs::File::create(dir.join("reference.csv"))?,
    )?;
    let mut f = std::fs::File::create(dir.join("config.json"))?;
    serde_json::to_writer_pretty(&mut f, cfg)?;
    f.write_all(b"\n")?;
    Ok(())
}
