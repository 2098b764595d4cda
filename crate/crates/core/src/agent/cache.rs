use crate::error::Result;
use crate::model::ModelSpec;
use crate::planning::{solve_diffusive, Grid, HjbSolution, SolverOptions};
use std::collections::HashMap;
use std::sync::{Arc, Mutex};

/// Diffusive solutions keyed by the exact parameter value. A diffusive
/// solution depends on θ, the reward, `Σ̄` and the grid but not on ε, so a
/// cache can be shared by every run on the same family and grid.
pub struct PlannerCache {
    grid: Grid,
    options: SolverOptions,
    solutions: Mutex<HashMap<Vec<u64>, Arc<HjbSolution>>>,
}

impl PlannerCache {
    pub fn new(grid: Grid, options: SolverOptions) -> Self {
        Self {
            grid,
            options,
            solutions: Mutex::new(HashMap::new()),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn options(&self) -> &SolverOptions {
        &self.options
    }

    pub fn len(&self) -> usize {
        self.solutions.lock().expect("planner cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, theta: &[f64]) -> Option<Arc<HjbSolution>> {
        self.solutions
            .lock()
            .expect("planner cache poisoned")
            .get(&key(theta))
            .cloned()
    }

    /// Cached solve for `model` at parameter `theta`. Concurrent misses on
    /// the same key may both solve; the results are identical.
    pub fn solve(&self, model: &ModelSpec, theta: &[f64]) -> Result<Arc<HjbSolution>> {
        if let Some(s) = self.get(theta) {
            return Ok(s);
        }
        let sol = Arc::new(solve_diffusive(
            &model.with_theta(theta),
            &self.grid,
            &self.options,
        )?);
        let mut map = self.solutions.lock().expect("planner cache poisoned");
        Ok(map.entry(key(theta)).or_insert(sol).clone())
    }
}

fn key(theta: &[f64]) -> Vec<u64> {
    theta.iter().map(|v| v.to_bits()).collect()
}
