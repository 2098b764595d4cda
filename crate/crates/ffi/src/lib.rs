//! C ABI over the simulator, planners and learning agent.
//!
//! Objects cross the boundary as opaque handles written through an output
//! pointer by a constructor and released by the matching `ofu_*_free`. Every
//! fallible call returns an [`OfuStatus`]; on failure the message is kept
//! per thread and can be copied out with [`ofu_last_error_message`].
//! Panics never unwind into C; they surface as [`OfuStatus::Panic`].

use ofu_diffusion::agent::{run, AgentConfig, AgentRun, PlannerCache};
use ofu_diffusion::harness::compute_regret;
use ofu_diffusion::learning::beta_n;
use ofu_diffusion::model::{ModelConfig, ModelSpec};
use ofu_diffusion::planning::{solve_diffusive, solve_jump, Grid, HjbSolution, SolverOptions};
use ofu_diffusion::process::ClockConfig;
use ofu_diffusion::Error;
use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OfuStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidConfig = 3,
    NotHurwitz = 4,
    NonConvergence = 5,
    GridTooSmall = 6,
    ModelFault = 7,
    Io = 8,
    Panic = 9,
    BufferTooSmall = 10,
}

/// A validated model of the true system.
pub struct OfuModel(ModelSpec);

/// A solved ergodic control problem on a grid.
pub struct OfuSolution(HjbSolution);

/// A finished closed-loop agent run.
pub struct OfuRun(AgentRun);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn status_of(e: &Error) -> OfuStatus {
    match e {
        Error::InvalidConfig(_) | Error::Json(_) | Error::Toml(_) => OfuStatus::InvalidConfig,
        Error::NotHurwitz { .. } => OfuStatus::NotHurwitz,
        Error::NonConvergence { .. } => OfuStatus::NonConvergence,
        Error::GridTooSmall { .. } => OfuStatus::GridTooSmall,
        Error::ModelFault(_) => OfuStatus::ModelFault,
        Error::Io(_) | Error::Csv(_) | Error::Plot(_) => OfuStatus::Io,
    }
}

/// Runs `f`, mapping errors and panics to a status and recording the message.
fn guard(f: impl FnOnce() -> Result<(), (OfuStatus, String)>) -> OfuStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => OfuStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            OfuStatus::Panic
        }
    }
}

fn lift<T>(r: ofu_diffusion::Result<T>) -> Result<T, (OfuStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (OfuStatus, String) {
    (OfuStatus::NullPointer, format!("{what} is null"))
}

fn bad(msg: &str) -> (OfuStatus, String) {
    (OfuStatus::InvalidArgument, msg.to_string())
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, (OfuStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| bad("string is not valid UTF-8"))
}

unsafe fn write_out<T>(out: *mut *mut T, value: T) -> Result<(), (OfuStatus, String)> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Copies the calling thread's last error message, NUL terminated, into
/// `buf`. Returns the message length in bytes without the terminator, or
/// `-1` if `buf` is too small (nothing is written then). A null `buf` only
/// queries the length.
#[no_mangle]
pub unsafe extern "C" fn ofu_last_error_message(buf: *mut c_char, len: usize) -> i64 {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if buf.is_null() {
            return msg.len() as i64;
        }
        if len < msg.len() + 1 {
            return -1;
        }
        ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, msg.len());
        *buf.add(msg.len()) = 0;
        msg.len() as i64
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ofu_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// The 1-D linear benchmark at clock parameter `epsilon`.
#[no_mangle]
pub unsafe extern "C" fn ofu_model_benchmark(epsilon: f64, out: *mut *mut OfuModel) -> OfuStatus {
    guard(|| {
        let m = lift(ModelSpec::benchmark_linear_1d(1.0).with_epsilon(epsilon))?;
        write_out(out, OfuModel(m))
    })
}

/// Builds a model from a JSON model configuration.
#[no_mangle]
pub unsafe extern "C" fn ofu_model_from_json(
    json: *const c_char,
    out: *mut *mut OfuModel,
) -> OfuStatus {
    guard(|| {
        let s = text(json, "json")?;
        let cfg: ModelConfig = lift(serde_json::from_str(s).map_err(Error::from))?;
        let m = lift(cfg.build())?;
        write_out(out, OfuModel(m))
    })
}

#[no_mangle]
pub unsafe extern "C" fn ofu_model_free(model: *mut OfuModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

#[no_mangle]
pub unsafe extern "C" fn ofu_model_state_dim(model: *const OfuModel, out: *mut usize) -> OfuStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let o = out.as_mut().ok_or_else(|| null("output pointer"))?;
        *o = m.0.state_dim();
        Ok(())
    })
}

fn grid_for(
    m: &ModelSpec,
    radius: f64,
    spacing: f64,
    actions_per_axis: usize,
) -> Result<Grid, (OfuStatus, String)> {
    lift(Grid::new(
        m.state_dim(),
        radius,
        spacing,
        &m.action_box,
        actions_per_axis,
    ))
}

/// Solves the diffusive ergodic HJB on `[-radius, radius]^d`.
#[no_mangle]
pub unsafe extern "C" fn ofu_solve_diffusive(
    model: *const OfuModel,
    radius: f64,
    spacing: f64,
    actions_per_axis: usize,
    out: *mut *mut OfuSolution,
) -> OfuStatus {
    guard(|| {
        let m = &model.as_ref().ok_or_else(|| null("model"))?.0;
        let g = grid_for(m, radius, spacing, actions_per_axis)?;
        let s = lift(solve_diffusive(m, &g, &SolverOptions::default()))?;
        write_out(out, OfuSolution(s))
    })
}

/// Solves the jump ergodic HJB at the model's ε, warm started from the
/// diffusive solution.
#[no_mangle]
pub unsafe extern "C" fn ofu_solve_jump(
    model: *const OfuModel,
    radius: f64,
    spacing: f64,
    actions_per_axis: usize,
    out: *mut *mut OfuSolution,
) -> OfuStatus {
    guard(|| {
        let m = &model.as_ref().ok_or_else(|| null("model"))?.0;
        let g = grid_for(m, radius, spacing, actions_per_axis)?;
        let opts = SolverOptions::default();
        let d = lift(solve_diffusive(m, &g, &opts))?;
        let s = lift(solve_jump(m, &g, &opts, Some(&d.w)))?;
        write_out(out, OfuSolution(s))
    })
}

#[no_mangle]
pub unsafe extern "C" fn ofu_solution_rho(sol: *const OfuSolution, out: *mut f64) -> OfuStatus {
    guard(|| {
        let s = sol.as_ref().ok_or_else(|| null("solution"))?;
        *out.as_mut().ok_or_else(|| null("output pointer"))? = s.0.rho;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ofu_solution_len(sol: *const OfuSolution, out: *mut usize) -> OfuStatus {
    guard(|| {
        let s = sol.as_ref().ok_or_else(|| null("solution"))?;
        *out.as_mut().ok_or_else(|| null("output pointer"))? = s.0.w.len();
        Ok(())
    })
}

/// Copies the relative value function (one value per grid node) into `buf`.
#[no_mangle]
pub unsafe extern "C" fn ofu_solution_values(
    sol: *const OfuSolution,
    buf: *mut f64,
    len: usize,
) -> OfuStatus {
    guard(|| {
        let s = sol.as_ref().ok_or_else(|| null("solution"))?;
        if buf.is_null() {
            return Err(null("buffer"));
        }
        if len < s.0.w.len() {
            return Err((
                OfuStatus::BufferTooSmall,
                format!("need {} values", s.0.w.len()),
            ));
        }
        ptr::copy_nonoverlapping(s.0.w.as_ptr(), buf, s.0.w.len());
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ofu_solution_free(sol: *mut OfuSolution) {
    if !sol.is_null() {
        drop(Box::from_raw(sol));
    }
}

/// Runs the optimistic agent against `model` for wall-clock time `horizon`.
/// `agent_json` may be null for the default agent; otherwise it is a JSON
/// agent configuration. The planner grid defaults to radius 6.
#[no_mangle]
pub unsafe extern "C" fn ofu_agent_run(
    model: *const OfuModel,
    agent_json: *const c_char,
    horizon: f64,
    seed: u64,
    out: *mut *mut OfuRun,
) -> OfuStatus {
    guard(|| {
        let m = &model.as_ref().ok_or_else(|| null("model"))?.0;
        let mut agent = AgentConfig::default();
        if !agent_json.is_null() {
            agent =
                lift(serde_json::from_str(text(agent_json, "agent_json")?).map_err(Error::from))?;
        }
        let grid = lift(Grid::for_model(m, &agent.planner, 6.0))?;
        let cache = PlannerCache::new(grid, agent.solver);
        let clock = lift(ClockConfig::new(m.epsilon, horizon, seed))?;
        let r = lift(run(&agent, m, &clock, &cache, None))?;
        write_out(out, OfuRun(r))
    })
}

#[no_mangle]
pub unsafe extern "C" fn ofu_run_events(r: *const OfuRun, out: *mut usize) -> OfuStatus {
    guard(|| {
        let r = r.as_ref().ok_or_else(|| null("run"))?;
        *out.as_mut().ok_or_else(|| null("output pointer"))? = r.0.log.n_events();
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ofu_run_episodes(r: *const OfuRun, out: *mut usize) -> OfuStatus {
    guard(|| {
        let r = r.as_ref().ok_or_else(|| null("run"))?;
        *out.as_mut().ok_or_else(|| null("output pointer"))? = r.0.episodes.len();
        Ok(())
    })
}

/// Regret `T ρ* - Σ rₙ` of the run against a supplied optimal gain.
#[no_mangle]
pub unsafe extern "C" fn ofu_run_regret(
    r: *const OfuRun,
    rho_star: f64,
    out: *mut f64,
) -> OfuStatus {
    guard(|| {
        let r = r.as_ref().ok_or_else(|| null("run"))?;
        if !rho_star.is_finite() {
            return Err(bad("rho_star must be finite"));
        }
        *out.as_mut().ok_or_else(|| null("output pointer"))? =
            compute_regret(&r.0.log, rho_star).regret;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn ofu_run_free(r: *mut OfuRun) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// Confidence radius `β_n(δ)` for the given constants.
#[no_mangle]
pub unsafe extern "C" fn ofu_beta_n(
    n: usize,
    delta: f64,
    epsilon: f64,
    sigma_norm: f64,
    log_cover: f64,
    h: f64,
    l0: f64,
    out: *mut f64,
) -> OfuStatus {
    guard(|| {
        if n == 0 || !(delta > 0.0 && delta < 1.0) || !(epsilon > 0.0) || !(sigma_norm > 0.0) {
            return Err(bad(
                "need n >= 1, delta in (0, 1), epsilon > 0 and sigma_norm > 0",
            ));
        }
        *out.as_mut().ok_or_else(|| null("output pointer"))? =
            beta_n(n, delta, epsilon, sigma_norm, log_cover, h, l0);
        Ok(())
    })
}
