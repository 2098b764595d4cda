use crate::error::{invalid, Result};
use crate::learning::FitOptions;
use crate::model::ModelSpec;
use crate::planning::{GridConfig, SolverOptions};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgentConfig {
    /// Overall confidence level; confidence sets use `delta / 3`.
    pub delta: f64,
    /// Nodes per parameter axis of the optimism grid over Θ.
    pub theta_grid_points: usize,
    pub planner: GridConfig,
    pub solver: SolverOptions,
    /// Action played at `τ_0`; the zero action (clamped into the action
    /// box) when absent.
    pub initial_action: Option<Vec<f64>>,
    pub x0: Option<Vec<f64>>,
    /// Hard cap on `‖X‖`; `10 · H(N)` with the expected event count when
    /// absent.
    pub explosion_cap: Option<f64>,
    #[serde(skip)]
    pub fit: FitOptions,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            delta: 0.1,
            theta_grid_points: 21,
            planner: GridConfig::default(),
            solver: SolverOptions::default(),
            initial_action: None,
            x0: None,
            explosion_cap: None,
            fit: FitOptions::default(),
        }
    }
}

impl AgentConfig {
    pub fn validate(&self, model: &ModelSpec) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return invalid("delta must lie in (0, 1)");
        }
        if self.theta_grid_points == 0 {
            return invalid("optimism grid needs at least one point per axis");
        }
        if let Some(a) = &self.initial_action {
            if !model.action_box.contains(a) {
                return invalid("initial action must lie in the action box");
            }
        }
        if let Some(x) = &self.x0 {
            if x.len() != model.state_dim() {
                return invalid("x0 has the wrong dimension");
            }
        }
        Ok(())
    }

    pub fn initial_action(&self, model: &ModelSpec) -> Vec<f64> {
        self.initial_action.clone().unwrap_or_else(|| {
            let mut a = vec![0.0; model.action_dim()];
            model.action_box.clamp(&mut a);
            a
        })
    }

    pub fn x0(&self, model: &ModelSpec) -> Vec<f64> {
        self.x0
            .clone()
            .unwrap_or_else(|| vec![0.0; model.state_dim()])
    }

    /// The finite optimism grid over Θ, lexicographic.
    pub fn theta_grid(&self, model: &ModelSpec) -> Vec<Vec<f64>> {
        model.theta_bounds.grid(self.theta_grid_points)
    }
}
