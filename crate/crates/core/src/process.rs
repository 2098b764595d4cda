//! The controlled jump process observed on a Poisson clock.
//!
//! Arrival times come from the clock stream, Gaussian marks from the mark
//! stream; neither depends on the actions taken, so two agents run with the
//! same seed face the same environment randomness.

use crate::error::{invalid, Error, Result};
use crate::model::ModelSpec;
use crate::rng::{stream_rng, Stream};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClockConfig {
    /// Mean inter-arrival time, in (0, 1].
    pub epsilon: f64,
    /// Wall-clock horizon `T`.
    pub horizon: f64,
    pub seed: u64,
}

impl ClockConfig {
    pub fn new(epsilon: f64, horizon: f64, seed: u64) -> Result<Self> {
        let c = Self {
            epsilon,
            horizon,
            seed,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return invalid("epsilon must lie in (0, 1]");
        }
        if !(self.horizon >= 0.0) || !self.horizon.is_finite() {
            return invalid("horizon must be finite and nonnegative");
        }
        Ok(())
    }
}

/// Arrival times `τ_1 < τ_2 < … ≤ T` (without `τ_0 = 0`).
pub fn sample_arrivals(cfg: &ClockConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let mut rng = stream_rng(cfg.seed, Stream::Clock);
    let gaps = Exp::new(1.0 / cfg.epsilon).expect("positive rate");
    let mut out = Vec::with_capacity((1.2 * cfg.horizon / cfg.epsilon) as usize + 16);
    let mut t = 0.0;
    loop {
        t += gaps.sample(&mut rng);
        if t > cfg.horizon {
            break;
        }
        out.push(t);
    }
    Ok(out)
}

/// A state-feedback control law.
pub trait Policy: Send + Sync {
    fn action_into(&self, x: &[f64], out: &mut [f64]);

    fn action(&self, x: &[f64], action_dim: usize) -> Vec<f64> {
        let mut a = vec![0.0; action_dim];
        self.action_into(x, &mut a);
        a
    }
}

/// Plays the same action everywhere.
#[derive(Debug, Clone)]
pub struct ConstantPolicy(pub Vec<f64>);

impl Policy for ConstantPolicy {
    fn action_into(&self, _x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.0);
    }
}

/// Wraps a closure as a [`Policy`].
pub struct FnPolicy<F>(pub F);

impl<F: Fn(&[f64], &mut [f64]) + Send + Sync> Policy for FnPolicy<F> {
    fn action_into(&self, x: &[f64], out: &mut [f64]) {
        (self.0)(x, out)
    }
}

/// Checked single event: `x + ε μ̄(x,a) + √ε Σ̄ ξ`.
pub fn step(model: &ModelSpec, x: &[f64], a: &[f64], mark: &[f64]) -> Result<Vec<f64>> {
    if x.len() != model.state_dim()
        || mark.len() != model.state_dim()
        || a.len() != model.action_dim()
    {
        return invalid("step arguments have the wrong dimension");
    }
    let mut out = vec![0.0; x.len()];
    model.step_into(x, a, mark, &mut out);
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::ModelFault(format!(
            "non-finite state after step from {x:?}"
        )));
    }
    Ok(out)
}

/// Realized trajectory. Index `n` runs over events `0..=N_T`; event 0 is
/// the initial time `τ_0 = 0`. Rewards and marks exist for `n ≥ 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct EventLog {
    pub state_dim: usize,
    pub action_dim: usize,
    pub horizon: f64,
    /// `τ_0 = 0, τ_1, …`.
    pub arrivals: Vec<f64>,
    /// Row-major `(N+1) × d`.
    pub states: Vec<f64>,
    /// Row-major `(N+1) × dA`; the last row may be missing when a run stopped
    /// before choosing an action at its final event.
    pub actions: Vec<f64>,
    /// `rewards[n-1] = ε r̄(X_n, a_n)`.
    pub rewards: Vec<f64>,
    /// `marks[(n-1)·d..n·d] = ξ_n`.
    pub marks: Vec<f64>,
}

impl EventLog {
    fn new(state_dim: usize, action_dim: usize, horizon: f64, x0: &[f64], capacity: usize) -> Self {
        let mut states = Vec::with_capacity((capacity + 1) * state_dim);
        states.extend_from_slice(x0);
        Self {
            state_dim,
            action_dim,
            horizon,
            arrivals: {
                let mut v = Vec::with_capacity(capacity + 1);
                v.push(0.0);
                v
            },
            states,
            actions: Vec::with_capacity((capacity + 1) * action_dim),
            rewards: Vec::with_capacity(capacity),
            marks: Vec::with_capacity(capacity * state_dim),
        }
    }

    /// Number of events after time 0 that were recorded.
    pub fn n_events(&self) -> usize {
        self.arrivals.len() - 1
    }

    pub fn state(&self, n: usize) -> &[f64] {
        &self.states[n * self.state_dim..(n + 1) * self.state_dim]
    }

    pub fn action(&self, n: usize) -> &[f64] {
        &self.actions[n * self.action_dim..(n + 1) * self.action_dim]
    }

    /// Mark `ξ_n` for `n ≥ 1`.
    pub fn mark(&self, n: usize) -> &[f64] {
        &self.marks[(n - 1) * self.state_dim..n * self.state_dim]
    }

    /// Reward `ε r̄(X_n, a_n)` for `n ≥ 1`.
    pub fn reward(&self, n: usize) -> f64 {
        self.rewards[n - 1]
    }

    pub fn reward_sum(&self) -> f64 {
        self.rewards.iter().sum()
    }

    /// Number of arrivals in `(0, t]`.
    pub fn count_at(&self, t: f64) -> usize {
        self.arrivals[1..].partition_point(|&s| s <= t)
    }

    /// The càdlàg state at wall-clock time `t`: constant on `[τ_{n-1}, τ_n)`.
    pub fn state_at(&self, t: f64) -> &[f64] {
        self.state(self.count_at(t))
    }

    pub fn max_state_norm(&self) -> f64 {
        self.states
            .chunks_exact(self.state_dim)
            .map(|x| x.iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    /// Re-run the recurrence from the stored marks and actions; returns the
    /// number of states that do not match bit for bit.
    pub fn replay_mismatches(&self, model: &ModelSpec) -> usize {
        let d = self.state_dim;
        let mut next = vec![0.0; d];
        let mut bad = 0;
        let steps = self.n_events().min(self.actions.len() / self.action_dim);
        for n in 0..steps {
            model.step_into(self.state(n), self.action(n), self.mark(n + 1), &mut next);
            if next
                .iter()
                .zip(self.state(n + 1))
                .any(|(a, b)| a.to_bits() != b.to_bits())
            {
                bad += 1;
            }
        }
        bad
    }

    /// CSV with columns `n, tau, x_1..x_d, a_1..a_dA, reward, xi_1..xi_d`.
    /// Reward and mark cells are empty at `n = 0`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["n".to_string(), "tau".to_string()];
        header.extend((1..=self.state_dim).map(|i| format!("x_{i}")));
        header.extend((1..=self.action_dim).map(|i| format!("a_{i}")));
        header.push("reward".into());
        header.extend((1..=self.state_dim).map(|i| format!("xi_{i}")));
        wr.write_record(&header)?;
        let n_actions = self.actions.len() / self.action_dim;
        for n in 0..=self.n_events() {
            let mut row = vec![n.to_string(), fmt_f64(self.arrivals[n])];
            row.extend(self.state(n).iter().map(|v| fmt_f64(*v)));
            if n < n_actions {
                row.extend(self.action(n).iter().map(|v| fmt_f64(*v)));
            } else {
                row.extend(std::iter::repeat_n(String::new(), self.action_dim));
            }
            if n >= 1 && n <= self.rewards.len() {
                row.push(fmt_f64(self.reward(n)));
            } else {
                row.push(String::new());
            }
            if n >= 1 {
                row.extend(self.mark(n).iter().map(|v| fmt_f64(*v)));
            } else {
                row.extend(std::iter::repeat_n(String::new(), self.state_dim));
            }
            wr.write_record(&row)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R, horizon: f64) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let header = rd.headers()?.clone();
        let d = header.iter().filter(|h| h.starts_with("x_")).count();
        let da = header.iter().filter(|h| h.starts_with("a_")).count();
        if d == 0 || header.len() != 3 + 2 * d + da {
            return invalid("event log header does not match n,tau,x..,a..,reward,xi..");
        }
        let mut log = EventLog::new(d, da, horizon, &vec![0.0; d], 0);
        log.states.clear();
        log.arrivals.clear();
        for rec in rd.records() {
            let rec = rec?;
            let get = |i: usize| -> Result<Option<f64>> {
                let s = rec.get(i).unwrap_or("");
                if s.is_empty() {
                    Ok(None)
                } else {
                    s.parse::<f64>()
                        .map(Some)
                        .map_err(|e| Error::InvalidConfig(format!("bad number {s:?}: {e}")))
                }
            };
            let n: usize = rec
                .get(0)
                .unwrap_or("")
                .parse()
                .map_err(|_| Error::InvalidConfig("bad event index".into()))?;
            log.arrivals.push(get(1)?.unwrap_or(0.0));
            for i in 0..d {
                log.states.push(get(2 + i)?.unwrap_or(f64::NAN));
            }
            if let Some(a0) = get(2 + d)? {
                log.actions.push(a0);
                for k in 1..da {
                    log.actions.push(get(2 + d + k)?.unwrap_or(f64::NAN));
                }
            }
            if n >= 1 {
                if let Some(r) = get(2 + d + da)? {
                    log.rewards.push(r);
                }
                for i in 0..d {
                    log.marks.push(get(3 + d + da + i)?.unwrap_or(f64::NAN));
                }
            }
        }
        if log.arrivals.is_empty() {
            return invalid("event log is empty");
        }
        Ok(log)
    }
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Why a rollout stopped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum RolloutStatus {
    Completed,
    /// `‖X‖` exceeded the hard cap at this event; the log ends there.
    Exploded {
        event: usize,
        norm: f64,
    },
}

/// Event-by-event environment. The caller observes the current state,
/// submits an action, and the environment records the reward and moves to
/// the next arrival.
pub struct JumpEnv<'m> {
    model: &'m ModelSpec,
    arrivals: Vec<f64>,
    marks: ChaCha8Rng,
    log: EventLog,
    cap: Option<f64>,
    n: usize,
    status: Option<RolloutStatus>,
    scratch: Vec<f64>,
    xi: Vec<f64>,
}

impl<'m> JumpEnv<'m> {
    pub fn new(
        model: &'m ModelSpec,
        cfg: &ClockConfig,
        x0: &[f64],
        cap: Option<f64>,
    ) -> Result<Self> {
        if (cfg.epsilon - model.epsilon).abs() > 0.0 {
            return invalid("clock epsilon differs from the model epsilon");
        }
        if x0.len() != model.state_dim() {
            return invalid("initial state has the wrong dimension");
        }
        let arrivals = sample_arrivals(cfg)?;
        let log = EventLog::new(
            model.state_dim(),
            model.action_dim(),
            cfg.horizon,
            x0,
            arrivals.len(),
        );
        Ok(Self {
            model,
            arrivals,
            marks: stream_rng(cfg.seed, Stream::Marks),
            log,
            cap,
            n: 0,
            status: None,
            scratch: vec![0.0; model.state_dim()],
            xi: vec![0.0; model.state_dim()],
        })
    }

    /// Total number of arrivals `N_T` scheduled before the horizon.
    pub fn scheduled_events(&self) -> usize {
        self.arrivals.len()
    }

    pub fn event(&self) -> usize {
        self.n
    }

    pub fn state(&self) -> &[f64] {
        self.log.state(self.n)
    }

    pub fn time(&self) -> f64 {
        self.log.arrivals[self.n]
    }

    pub fn log(&self) -> &EventLog {
        &self.log
    }

    pub fn is_done(&self) -> bool {
        self.status.is_some()
    }

    /// Play `a` at the current event. Returns the recorded reward (zero at
    /// event 0) and advances unless the horizon has been reached.
    pub fn act(&mut self, a: &[f64]) -> Result<f64> {
        if self.status.is_some() {
            return invalid("environment already finished");
        }
        let d = self.model.state_dim();
        self.log.actions.extend_from_slice(a);
        let mut reward = 0.0;
        if self.n >= 1 {
            reward = self.model.epsilon * self.model.reward_bar(self.log.state(self.n), a);
            if !reward.is_finite() {
                return Err(Error::ModelFault("non-finite reward".into()));
            }
            self.log.rewards.push(reward);
        }
        if self.n == self.arrivals.len() {
            self.status = Some(RolloutStatus::Completed);
            return Ok(reward);
        }
        for v in self.xi.iter_mut() {
            *v = self.marks.sample(StandardNormal);
        }
        let start = self.n * d;
        self.model.step_into(
            &self.log.states[start..start + d],
            a,
            &self.xi,
            &mut self.scratch,
        );
        if self.scratch.iter().any(|v| !v.is_finite()) {
            return Err(Error::ModelFault(format!(
                "non-finite state at event {}",
                self.n + 1
            )));
        }
        self.n += 1;
        self.log.arrivals.push(self.arrivals[self.n - 1]);
        self.log.states.extend_from_slice(&self.scratch);
        self.log.marks.extend_from_slice(&self.xi);
        if let Some(cap) = self.cap {
            let norm = self.scratch.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > cap {
                self.status = Some(RolloutStatus::Exploded {
                    event: self.n,
                    norm,
                });
            }
        }
        Ok(reward)
    }

    pub fn finish(self) -> (EventLog, RolloutStatus) {
        (self.log, self.status.unwrap_or(RolloutStatus::Completed))
    }
}

#[derive(Debug, Clone)]
pub struct Rollout {
    pub log: EventLog,
    pub status: RolloutStatus,
}

/// Closed-loop trajectory of a fixed policy up to the horizon.
pub fn rollout(
    policy: &dyn Policy,
    model: &ModelSpec,
    cfg: &ClockConfig,
    x0: &[f64],
    cap: Option<f64>,
) -> Result<Rollout> {
    let mut env = JumpEnv::new(model, cfg, x0, cap)?;
    let mut a = vec![0.0; model.action_dim()];
    let mut x = x0.to_vec();
    while !env.is_done() {
        x.copy_from_slice(env.state());
        policy.action_into(&x, &mut a);
        env.act(&a)?;
    }
    let (log, status) = env.finish();
    Ok(Rollout { log, status })
}

/// Draws `count` standard normal marks of dimension `d` from a seeded stream;
/// used by tests that need marks outside a rollout.
pub fn draw_marks(seed: u64, d: usize, count: usize) -> Vec<Vec<f64>> {
    let mut rng = stream_rng(seed, Stream::Marks);
    (0..count)
        .map(|_| (0..d).map(|_| rng.sample(StandardNormal)).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_horizon_has_no_arrivals() {
        let cfg = ClockConfig::new(1.0, 0.0, 1).unwrap();
        assert!(sample_arrivals(&cfg).unwrap().is_empty());
        let m = ModelSpec::benchmark_linear_1d(1.0);
        let r = rollout(&ConstantPolicy(vec![0.0]), &m, &cfg, &[0.3], None).unwrap();
        assert_eq!(r.log.n_events(), 0);
        assert!(r.log.rewards.is_empty());
        assert_eq!(r.log.states, vec![0.3]);
    }

    #[test]
    fn rollout_recurrence_and_accounting() {
        let m = ModelSpec::benchmark_linear_1d(0.1);
        let cfg = ClockConfig::new(0.1, 20.0, 9).unwrap();
        let r = rollout(
            &FnPolicy(|x: &[f64], a: &mut [f64]| a[0] = (-x[0]).clamp(-1.0, 1.0)),
            &m,
            &cfg,
            &[0.0],
            None,
        )
        .unwrap();
        assert_eq!(r.status, RolloutStatus::Completed);
        assert_eq!(r.log.rewards.len(), r.log.n_events());
        assert_eq!(r.log.n_events(), sample_arrivals(&cfg).unwrap().len());
        assert_eq!(r.log.replay_mismatches(&m), 0);
        assert!(r.log.arrivals.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn state_query_is_piecewise_constant() {
        let m = ModelSpec::benchmark_linear_1d(0.5);
        let cfg = ClockConfig::new(0.5, 5.0, 2).unwrap();
        let r = rollout(&ConstantPolicy(vec![0.5]), &m, &cfg, &[0.0], None).unwrap();
        let log = &r.log;
        for n in 1..log.n_events() {
            let mid = 0.5 * (log.arrivals[n] + log.arrivals[n + 1]);
            assert_eq!(log.state_at(mid), log.state(n));
            assert_eq!(log.state_at(log.arrivals[n]), log.state(n));
        }
        assert_eq!(log.state_at(0.5 * log.arrivals[1]), log.state(0));
    }

    #[test]
    fn explosion_guard_stops_the_run() {
        let m = ModelSpec::benchmark_linear_1d(0.5);
        let cfg = ClockConfig::new(0.5, 100.0, 3).unwrap();
        let r = rollout(&ConstantPolicy(vec![1.0]), &m, &cfg, &[0.0], Some(0.5)).unwrap();
        assert!(matches!(r.status, RolloutStatus::Exploded { .. }));
        assert!(r.log.n_events() < sample_arrivals(&cfg).unwrap().len());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let m = ModelSpec::benchmark_linear_1d(0.2);
        let cfg = ClockConfig::new(0.2, 3.0, 4).unwrap();
        let r = rollout(&ConstantPolicy(vec![0.25]), &m, &cfg, &[0.1], None).unwrap();
        let mut buf = Vec::new();
        r.log.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("n,tau,x_1,a_1,reward,xi_1\n"));
        let back = EventLog::read_csv(&buf[..], 3.0).unwrap();
        assert_eq!(back, r.log);
    }
}
