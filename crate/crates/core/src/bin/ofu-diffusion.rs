//! Command-line front end. Exit status: 0 on success, 2 when a check fails,
//! 1 on a runtime fault.

use clap::{Args, Parser, Subcommand};
use ofu_diffusion::agent::{run, write_episodes_csv, write_telemetry_csv, PlannerCache};
use ofu_diffusion::harness::{
    compute_regret, coverage_study, decompose_regret, emit_plots, event_flags, gap_study,
    learning_trace, planner_grid, read_gap_csv, read_rows, reference_solution, sweep,
    write_gap_csv, write_sweep, ExperimentConfig, FrequencyCheck, GapRow, SummaryRow,
};
use ofu_diffusion::learning::{write_learning_csv, RadiusSchedule};
use ofu_diffusion::model::{generate_probes, load_document, verify_contraction};
use ofu_diffusion::planning::{solve_diffusive, solve_jump, Grid};
use ofu_diffusion::process::ClockConfig;
use ofu_diffusion::stats;
use ofu_diffusion::Result;
use serde_json::json;
use std::fs::File;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "ofu-diffusion",
    version,
    about = "Optimistic learning and control on a Poisson clock"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// Experiment configuration (JSON, or TOML by extension).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base seed. For sweeps the seed list becomes `seed, seed+1, …`.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Clock parameter(s) ε, comma separated.
    #[arg(long, value_delimiter = ',')]
    eps: Vec<f64>,
    /// Horizon(s) T, comma separated.
    #[arg(long, value_delimiter = ',')]
    horizon: Vec<f64>,
    /// Confidence level δ.
    #[arg(long)]
    delta: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Stability certificate of the model and a randomized contraction check.
    Certify {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 10_000)]
        probes: usize,
    },
    /// Diffusive and jump planners along the ε list.
    Plan {
        #[command(flatten)]
        common: Common,
    },
    /// Coverage study of the confidence sets along full pipeline runs.
    Learn {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 200)]
        replicas: usize,
    },
    /// One closed-loop agent run with full telemetry.
    Run {
        #[command(flatten)]
        common: Common,
    },
    /// Seeded `(ε, T, seed)` sweep.
    Sweep {
        #[command(flatten)]
        common: Common,
    },
    /// Figures from an existing sweep directory (`--out`).
    Plot {
        #[command(flatten)]
        common: Common,
    },
}

enum Outcome {
    Ok,
    CheckFailed,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::CheckFailed) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(cmd: Command) -> Result<Outcome> {
    match cmd {
        Command::Certify { common, probes } => certify(&common, probes),
        Command::Plan { common } => plan(&common),
        Command::Learn { common, replicas } => learn(&common, replicas),
        Command::Run { common } => run_one(&common),
        Command::Sweep { common } => run_sweep(&common),
        Command::Plot { common } => plot(&common),
    }
}

/// Loads the configuration and applies command-line overrides.
fn load(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg: ExperimentConfig = match &common.config {
        Some(p) => load_document(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(&e) = common.eps.first() {
        cfg.model.epsilon = e;
        cfg.sweep.epsilons = common.eps.clone();
    }
    if !common.horizon.is_empty() {
        cfg.sweep.horizons = common.horizon.clone();
    }
    if let Some(d) = common.delta {
        cfg.agent.delta = d;
    }
    if let Some(s) = common.seed {
        let n = cfg.sweep.seeds.len().max(1) as u64;
        cfg.sweep.seeds = (s..s + n).collect();
    }
    if let Some(o) = &common.out {
        cfg.sweep.output = Some(o.clone());
    }
    Ok(cfg)
}

fn out_dir(common: &Common, cfg: &ExperimentConfig, fallback: &str) -> Result<PathBuf> {
    let dir = common
        .out
        .clone()
        .or_else(|| cfg.sweep.output.clone())
        .unwrap_or_else(|| PathBuf::from(fallback));
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn verdict(name: &str, ok: bool) -> bool {
    println!("{} {name}", if ok { "PASS" } else { "FAIL" });
    ok
}

fn outcome(ok: bool) -> Outcome {
    if ok {
        Outcome::Ok
    } else {
        Outcome::CheckFailed
    }
}

fn certify(common: &Common, probes: usize) -> Result<Outcome> {
    let cfg = load(common)?;
    let model = cfg.model.build()?;
    let family = model.family_lyapunov()?;
    let point = model.point_lyapunov()?;
    let eps_max = family.chain_max_epsilon.min(family.max_epsilon);
    let list = generate_probes(&model, eps_max, probes, 10.0, common.seed.unwrap_or(0));
    let report = verify_contraction(&model, &family, &list);
    let in_range = model.epsilon <= eps_max;
    let value = json!({
        "family_certificate": family,
        "point_certificate": point,
        "epsilon": model.epsilon,
        "certified_epsilon_max": eps_max,
        "probes": report.probes,
        "pass_fraction": report.pass_fraction,
        "violations": report.violations.len(),
    });
    if let Some(dir) = &common.out {
        std::fs::create_dir_all(dir)?;
        write_json(&dir.join("certificate.json"), &value)?;
    }
    println!("{}", serde_json::to_string_pretty(&value)?);
    let ok = verdict("contraction", report.passed())
        & verdict("epsilon within certified range", in_range);
    Ok(outcome(ok))
}

fn plan(common: &Common) -> Result<Outcome> {
    let cfg = load(common)?;
    let model = cfg.model.build()?;
    let dir = out_dir(common, &cfg, "plan-out")?;
    let grid = Grid::for_model(&model, &cfg.reference.grid, 6.0)?;
    let opts = cfg.reference.solver;
    for &e in &cfg.sweep.epsilons {
        let m = model.with_epsilon(e)?;
        let diff = solve_diffusive(&m, &grid, &opts)?;
        let jump = solve_jump(&m, &grid, &opts, Some(&diff.w))?;
        diff.write_files(&dir, &format!("diffusive_eps{e}"))?;
        jump.write_files(&dir, &format!("jump_eps{e}"))?;
    }
    let rows = gap_study(&model, &grid, &opts, &cfg.sweep.epsilons)?;
    write_gap_csv(&rows, File::create(dir.join("gap.csv"))?)?;
    emit_plots(&dir, &[], &rows)?;
    for r in &rows {
        println!(
            "eps {:<6} rho_bar {:.8} rho {:.8} gap {:.3e} policy suboptimality {:.3e}",
            r.epsilon, r.rho_diffusive, r.rho_jump, r.gap, r.suboptimality
        );
    }
    Ok(outcome(gap_checks(&rows)))
}

/// Monotone gap and transfer along decreasing ε, with the slope window.
fn gap_checks(rows: &[GapRow]) -> bool {
    if rows.len() < 2 {
        return true;
    }
    let mut sorted = rows.to_vec();
    sorted.sort_by(|a, b| b.epsilon.total_cmp(&a.epsilon));
    let tol = 2.0 * sorted.iter().map(|r| r.residual).fold(0.0, f64::max);
    let monotone = sorted.windows(2).all(|w| w[1].gap <= w[0].gap + tol);
    let eps: Vec<f64> = sorted.iter().map(|r| r.epsilon).collect();
    let gaps: Vec<f64> = sorted
        .iter()
        .map(|r| r.gap.max(f64::MIN_POSITIVE))
        .collect();
    let slope = stats::log_log_slope(&eps, &gaps);
    println!("gap log-log slope {slope:.3}");
    let transfer = sorted
        .windows(2)
        .all(|w| w[1].suboptimality <= w[0].suboptimality + tol);
    verdict("gap nonincreasing", monotone)
        & verdict("gap slope in [0.3, 0.8]", (0.3..=0.8).contains(&slope))
        & verdict("policy suboptimality nonincreasing", transfer)
}

fn learn(common: &Common, replicas: usize) -> Result<Outcome> {
    let cfg = load(common)?;
    let model = cfg.model.build()?;
    let dir = out_dir(common, &cfg, "learn-out")?;
    let horizon = cfg.sweep.horizons.first().copied().unwrap_or(2000.0);
    let delta = cfg.agent.delta;
    let grid = planner_grid(&model, &cfg.agent, &cfg.sweep)?;
    let cache = PlannerCache::new(grid, cfg.agent.solver);
    let seed = common.seed.unwrap_or(0);
    let study = coverage_study(
        &model,
        &cfg.agent,
        &cache,
        horizon,
        delta,
        replicas,
        seed,
        cfg.sweep.coverage_stride,
    )?;

    let clock = ClockConfig::new(model.epsilon, horizon, seed)?;
    let first = run(&cfg.agent, &model, &clock, &cache, None)?;
    let lyap = model.family_lyapunov()?;
    let schedule = RadiusSchedule::new(&model, &lyap, first.log.state(0), delta);
    let stride = ((1.0 / model.epsilon).round() as usize).max(1);
    let rows = learning_trace(&first.log, &model, schedule, stride)?;
    write_learning_csv(&rows, File::create(dir.join("learning.csv"))?)?;
    write_json(&dir.join("coverage.json"), &serde_json::to_value(&study)?)?;
    println!("{}", serde_json::to_string_pretty(&study)?);
    Ok(outcome(verdict(
        "joint coverage and boundedness",
        study.passed(),
    )))
}

fn run_one(common: &Common) -> Result<Outcome> {
    let cfg = load(common)?;
    let model = cfg.model.build()?;
    let dir = out_dir(common, &cfg, "run-out")?;
    let horizon = cfg.sweep.horizons.first().copied().unwrap_or(2000.0);
    let seed = common.seed.unwrap_or(0);
    let reference_grid = Grid::for_model(&model, &cfg.reference.grid, 6.0)?;
    let rho_star = reference_solution(&model, &reference_grid, &cfg.reference.solver)?.rho;
    let grid = planner_grid(&model, &cfg.agent, &cfg.sweep)?;
    let cache = PlannerCache::new(grid, cfg.agent.solver);
    let clock = ClockConfig::new(model.epsilon, horizon, seed)?;
    let out = run(&cfg.agent, &model, &clock, &cache, Some(rho_star))?;

    out.log.write_csv(File::create(dir.join("events.csv"))?)?;
    write_episodes_csv(&out.episodes, File::create(dir.join("episodes.csv"))?)?;
    write_telemetry_csv(&out.telemetry, File::create(dir.join("telemetry.csv"))?)?;
    let stride = ((1.0 / model.epsilon).round() as usize).max(1);
    let rows = learning_trace(&out.log, &model, out.schedule.clone(), stride)?;
    write_learning_csv(&rows, File::create(dir.join("learning.csv"))?)?;

    let mut report = compute_regret(&out.log, rho_star);
    report.flags = Some(event_flags(
        &out.log,
        &model,
        cfg.agent.delta / 3.0,
        cfg.sweep.coverage_stride,
    )?);
    report.decomposition = Some(decompose_regret(
        &out,
        &model,
        rho_star,
        &cfg.reference.solver,
    )?);
    write_json(
        &dir.join("report.json"),
        &json!({ "status": format!("{:?}", out.status), "episodes": out.episodes.len(), "report": report }),
    )?;
    println!(
        "events {} episodes {} regret {:.6} (rho* {:.8}) status {:?}",
        report.events,
        out.episodes.len(),
        report.regret,
        rho_star,
        out.status
    );
    let identity = verdict(
        "regret identity",
        report.identity_error() <= report.identity_tolerance(),
    );
    let dec = report
        .decomposition
        .as_ref()
        .is_some_and(|d| d.reconstructs());
    Ok(outcome(
        identity & verdict("decomposition reconstructs", dec),
    ))
}

fn run_sweep(common: &Common) -> Result<Outcome> {
    let cfg = load(common)?;
    let dir = out_dir(common, &cfg, "sweep-out")?;
    let result = sweep(&cfg)?;
    write_sweep(&dir, &cfg, &result)?;
    let gaps = match File::open(dir.join("gap.csv")) {
        Ok(f) => read_gap_csv(f)?,
        Err(_) => Vec::new(),
    };
    emit_plots(&dir, &result.summary, &gaps)?;
    for s in &result.summary {
        println!(
            "eps {:<6} T {:<8} runs {:>3} median regret {:>12} median K {:>5}",
            s.epsilon,
            s.horizon,
            s.completed,
            s.median_regret.map_or("-".into(), |v| format!("{v:.4}")),
            s.median_episodes.map_or("-".into(), |v| format!("{v}")),
        );
    }
    let finished: Vec<_> = result
        .runs
        .iter()
        .filter_map(|r| r.event_violation())
        .collect();
    let events = FrequencyCheck::new(
        finished.len(),
        finished.iter().filter(|v| **v).count(),
        cfg.agent.delta,
    );
    let failures = result.runs.iter().filter(|r| !r.completed()).count();
    let ok = verdict("event violation frequency", events.passed())
        & verdict("all runs completed", failures == 0);
    Ok(outcome(ok))
}

fn plot(common: &Common) -> Result<Outcome> {
    let dir = common
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("sweep-out"));
    let summary: Vec<SummaryRow> = match File::open(dir.join("summary.csv")) {
        Ok(f) => read_rows(f)?,
        Err(_) => Vec::new(),
    };
    let gaps = match File::open(dir.join("gap.csv")) {
        Ok(f) => read_gap_csv(f)?,
        Err(_) => Vec::new(),
    };
    for p in emit_plots(&dir, &summary, &gaps)? {
        println!("{}", p.display());
    }
    Ok(Outcome::Ok)
}
