use super::grid::Grid;
use crate::error::Result;
use crate::process::fmt_f64;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    /// Ergodic HJB of the limiting diffusion.
    Diffusive,
    /// Non-local ergodic HJB of the jump process.
    Jump,
    /// Gain and relative value of a fixed policy table under jump dynamics.
    PolicyEvaluation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverOptions {
    /// Stopping tolerance on the gain residual.
    pub tol: f64,
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iterations: 200_000,
        }
    }
}

/// Relative value function, gain and greedy policy on a grid.
#[derive(Debug, Clone)]
pub struct HjbSolution {
    pub kind: SolverKind,
    pub grid: Grid,
    pub theta: Vec<f64>,
    pub epsilon: f64,
    /// Normalized so that `w(origin) = 0`.
    pub w: Vec<f64>,
    pub rho: f64,
    /// Action index per node.
    pub policy: Vec<usize>,
    pub residual: f64,
    pub iterations: usize,
    pub lipschitz_estimate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionSidecar {
    pub kind: SolverKind,
    pub rho: f64,
    pub residual: f64,
    pub iterations: usize,
    pub lipschitz_estimate: f64,
    pub theta: Vec<f64>,
    pub epsilon: f64,
    pub spacing: f64,
    pub radius: f64,
    pub actions: usize,
}

impl HjbSolution {
    pub fn action(&self, node: usize) -> &[f64] {
        &self.grid.actions[self.policy[node]]
    }

    pub fn sidecar(&self) -> SolutionSidecar {
        SolutionSidecar {
            kind: self.kind,
            rho: self.rho,
            residual: self.residual,
            iterations: self.iterations,
            lipschitz_estimate: self.lipschitz_estimate,
            theta: self.theta.clone(),
            epsilon: self.epsilon,
            spacing: self.grid.spacing,
            radius: self.grid.radius(),
            actions: self.grid.actions.len(),
        }
    }

    /// Columns `x_1..x_d, w, a_1..a_dA`, one row per node.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let d = self.grid.dim;
        let da = self.grid.action_dim();
        let mut header: Vec<String> = (1..=d).map(|i| format!("x_{i}")).collect();
        header.push("w".into());
        header.extend((1..=da).map(|i| format!("a_{i}")));
        wr.write_record(&header)?;
        let mut x = vec![0.0; d];
        for node in 0..self.grid.len() {
            self.grid.coords_into(node, &mut x);
            let mut rec: Vec<String> = x.iter().map(|v| fmt_f64(*v)).collect();
            rec.push(fmt_f64(self.w[node]));
            rec.extend(self.action(node).iter().map(|v| fmt_f64(*v)));
            wr.write_record(&rec)?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Writes `<stem>.csv` and `<stem>.json` into `dir`.
    pub fn write_files(&self, dir: &Path, stem: &str) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        self.write_csv(std::fs::File::create(dir.join(format!("{stem}.csv")))?)?;
        let json = serde_json::to_string_pretty(&self.sidecar())?;
        std::fs::write(dir.join(format!("{stem}.json")), json + "\n")?;
        Ok(())
    }
}
