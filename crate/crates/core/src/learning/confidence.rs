use super::bounds::RadiusSchedule;
use super::design::{quad_form, DesignLog, LinearStats};
use super::nlls::{fit_linear, fit_nlls, FitOptions, FitResult};
use crate::error::Result;
use crate::model::{DriftFamily, ModelSpec, ParamBox};
use crate::process::fmt_f64;
use serde::Serialize;
use std::io::Write;

/// Least-squares estimate together with its confidence set
/// `{θ : √Σᵢ ‖μ_θ(zᵢ) - μ_θ̂(zᵢ)‖² ≤ β_n}` over the first `n` transitions.
///
/// Before any data is seen the set is the whole parameter box.
#[derive(Debug, Clone)]
pub struct ConfidenceState {
    pub family: DriftFamily,
    pub bounds: ParamBox,
    pub epsilon: f64,
    pub schedule: RadiusSchedule,
    pub fit_options: FitOptions,
    pub design: DesignLog,
    /// Transitions included in the current fit.
    pub n: usize,
    pub theta_hat: Vec<f64>,
    pub beta: f64,
    pub last_fit: Option<FitResult>,
    stats: Option<LinearStats>,
}

impl ConfidenceState {
    /// `schedule` carries the confidence level actually used for β.
    pub fn new(model: &ModelSpec, schedule: RadiusSchedule, fit_options: FitOptions) -> Self {
        let stats = model
            .family
            .is_linear_in_theta()
            .then(|| LinearStats::new(model.family.theta_dim()));
        Self {
            family: model.family.clone(),
            bounds: model.theta_bounds.clone(),
            epsilon: model.epsilon,
            beta: schedule.beta(0),
            schedule,
            fit_options,
            design: DesignLog::new(model.state_dim(), model.action_dim()),
            n: 0,
            theta_hat: model.theta_bounds.center(),
            last_fit: None,
            stats,
        }
    }

    pub fn delta(&self) -> f64 {
        self.schedule.delta
    }

    /// Record a transition. The fit is unchanged until [`Self::refit`].
    pub fn observe(&mut self, x: &[f64], a: &[f64], x_next: &[f64]) {
        self.design.push(x, a, x_next);
        if let Some(s) = self.stats.as_mut() {
            let i = self.design.len() - 1;
            s.push(
                &self.family,
                self.design.state(i),
                self.design.action(i),
                self.design.increment(i),
            );
        }
    }

    /// Refit on every recorded transition and update `β_n`.
    pub fn refit(&mut self) -> Result<&FitResult> {
        let n = self.design.len();
        let warm = self.theta_hat.clone();
        let fit = match &self.stats {
            Some(s) => fit_linear(
                s,
                self.epsilon,
                &self.bounds,
                Some(&warm),
                &self.fit_options,
            )?,
            None => fit_nlls(
                &self.family,
                &self.bounds,
                &self.design,
                n,
                self.epsilon,
                Some(&warm),
                &self.fit_options,
            )?,
        };
        self.n = n;
        self.theta_hat = fit.theta.clone();
        self.beta = self.schedule.beta(n);
        Ok(self.last_fit.insert(fit))
    }

    pub fn linear_stats(&self) -> Option<&LinearStats> {
        self.stats.as_ref()
    }

    /// `Σ_{i<upto} ‖μ_θ(zᵢ) - μ_θ'(zᵢ)‖²` with `μ = ε μ̄`.
    pub fn discrepancy_sq_upto(&self, theta: &[f64], other: &[f64], upto: usize) -> f64 {
        if let (Some(s), true) = (&self.stats, upto == self.design.len()) {
            return s.discrepancy_sq(theta, other, self.epsilon);
        }
        design_discrepancy_sq(&self.family, &self.design, upto, self.epsilon, theta, other)
    }

    /// Design-weighted distance from `θ̂_n` over the fitted transitions.
    pub fn distance(&self, theta: &[f64]) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        let sq = match &self.stats {
            Some(s) if self.n == self.design.len() => {
                s.discrepancy_sq(theta, &self.theta_hat, self.epsilon)
            }
            _ => design_discrepancy_sq(
                &self.family,
                &self.design,
                self.n,
                self.epsilon,
                theta,
                &self.theta_hat,
            ),
        };
        sq.sqrt()
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        self.bounds.contains(theta) && (self.n == 0 || self.distance(theta) <= self.beta)
    }

    pub fn h_delta(&self) -> f64 {
        self.schedule.h(self.n)
    }

    pub fn row(&self, theta_star: &[f64]) -> LearningRow {
        LearningRow {
            n: self.n,
            beta: self.beta,
            theta_hat: self.theta_hat.clone(),
            membership: self.contains(theta_star),
            h_delta: self.h_delta(),
        }
    }
}

pub fn design_discrepancy_sq(
    family: &DriftFamily,
    design: &DesignLog,
    upto: usize,
    epsilon: f64,
    theta: &[f64],
    other: &[f64],
) -> f64 {
    if family.is_linear_in_theta() {
        let mut s = LinearStats::new(family.theta_dim());
        for i in 0..upto.min(design.len()) {
            s.push_gram(family, design.state(i), design.action(i));
        }
        return quad_form(&s.gram, theta, other) * epsilon * epsilon;
    }
    let d = design.state_dim;
    let (mut u, mut v) = (vec![0.0; d], vec![0.0; d]);
    let mut acc = 0.0;
    for i in 0..upto.min(design.len()) {
        family.drift_bar_into(theta, design.state(i), design.action(i), &mut u);
        family.drift_bar_into(other, design.state(i), design.action(i), &mut v);
        acc += u
            .iter()
            .zip(&v)
            .map(|(p, q)| (epsilon * (p - q)).powi(2))
            .sum::<f64>();
    }
    acc
}

/// One line of learning telemetry.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LearningRow {
    pub n: usize,
    pub beta: f64,
    pub theta_hat: Vec<f64>,
    pub membership: bool,
    pub h_delta: f64,
}

pub fn write_learning_csv<W: Write>(rows: &[LearningRow], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    let p = rows.first().map_or(0, |r| r.theta_hat.len());
    let mut header = vec!["n".to_string(), "beta_n".to_string()];
    header.extend((1..=p).map(|j| format!("theta_hat_{j}")));
    header.push("membership".into());
    header.push("H_delta".into());
    wr.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.n.to_string(), fmt_f64(r.beta)];
        rec.extend(r.theta_hat.iter().map(|v| fmt_f64(*v)));
        rec.push(u8::from(r.membership).to_string());
        rec.push(fmt_f64(r.h_delta));
        wr.write_record(&rec)?;
    }
    wr.flush()?;
    Ok(())
}
