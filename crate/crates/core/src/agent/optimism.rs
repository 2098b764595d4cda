use super::cache::PlannerCache;
use crate::learning::ConfidenceState;
use crate::model::ModelSpec;
use crate::planning::HjbSolution;
use rayon::prelude::*;
use std::sync::Arc;

#[derive(Debug, Clone)]
pub struct Selection {
    pub theta: Vec<f64>,
    pub solution: Arc<HjbSolution>,
    /// Optimism grid points inside the confidence set.
    pub feasible_grid: usize,
    /// Candidates whose planner failed.
    pub skipped: usize,
    /// Diffusive gain at the least-squares fit, for the optimism check.
    pub rho_at_fit: Option<f64>,
}

/// Candidates are the grid points inside the confidence set followed by the
/// fit itself; the highest diffusive gain wins with ties to the lowest
/// index. Candidate solves run concurrently and are joined in index order.
pub fn select_optimistic(
    conf: &ConfidenceState,
    theta_grid: &[Vec<f64>],
    cache: &PlannerCache,
    model: &ModelSpec,
) -> Option<Selection> {
    let mut cands: Vec<&[f64]> = theta_grid
        .iter()
        .filter(|t| conf.contains(t))
        .map(Vec::as_slice)
        .collect();
    let feasible_grid = cands.len();
    cands.push(&conf.theta_hat);
    let solved: Vec<Option<Arc<HjbSolution>>> = cands
        .par_iter()
        .map(|t| cache.solve(model, t).ok())
        .collect();
    let skipped = solved.iter().filter(|s| s.is_none()).count();
    let rho_at_fit = solved.last().and_then(|s| s.as_ref().map(|s| s.rho));
    let mut best: Option<(usize, &Arc<HjbSolution>)> = None;
    for (i, s) in solved.iter().enumerate() {
        if let Some(s) = s {
            if best.is_none_or(|(_, b)| s.rho > b.rho) {
                best = Some((i, s));
            }
        }
    }
    best.map(|(i, s)| Selection {
        theta: cands[i].to_vec(),
        solution: s.clone(),
        feasible_grid,
        skipped,
        rho_at_fit,
    })
}
