//! Non-local ergodic HJB of the jump process by relative value iteration.
//! The expectation over the next mark uses a tensor Gauss–Hermite rule and
//! multilinear interpolation, extended linearly beyond the grid.

use super::diffusive::{span, tables};
use super::grid::Grid;
use super::quadrature::gauss_hermite_tensor;
use super::solution::{HjbSolution, SolverKind, SolverOptions};
use crate::error::{invalid, Error, Result};
use crate::model::ModelSpec;
use rayon::prelude::*;

/// Quadrature nodes per axis.
pub const HERMITE_ORDER: usize = 11;

/// `w ↦ E[w(m + √ε Σ̄ ξ)]` for a grid function `w`.
#[derive(Debug, Clone)]
pub struct JumpOperator {
    pub grid: Grid,
    /// Scaled noise offsets `√ε Σ̄ ξₖ` and their weights.
    pub offsets: Vec<(Vec<f64>, f64)>,
}

impl JumpOperator {
    pub fn new(model: &ModelSpec, grid: &Grid) -> Self {
        let d = grid.dim;
        let se = model.sqrt_epsilon();
        let offsets = gauss_hermite_tensor(HERMITE_ORDER, d)
            .into_iter()
            .map(|(xi, wt)| {
                let off = (0..d)
                    .map(|i| se * (0..d).map(|j| model.sigma_bar[(i, j)] * xi[j]).sum::<f64>())
                    .collect();
                (off, wt)
            })
            .collect();
        Self {
            grid: grid.clone(),
            offsets,
        }
    }

    #[inline]
    pub fn expect(&self, w: &[f64], mean: &[f64]) -> f64 {
        let mut p = [0.0; 2];
        let d = self.grid.dim;
        let mut acc = 0.0;
        for (off, wt) in &self.offsets {
            for k in 0..d {
                p[k] = mean[k] + off[k];
            }
            acc += wt * self.grid.interpolate(w, &p[..d]);
        }
        acc
    }

    /// Largest sup-norm reach of a quadrature point from the given means.
    pub fn reach(&self, mean: &[f64]) -> f64 {
        self.offsets
            .iter()
            .map(|(off, _)| {
                off.iter()
                    .zip(mean)
                    .map(|(o, m)| (o + m).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }
}

pub fn solve_jump(
    model: &ModelSpec,
    grid: &Grid,
    opts: &SolverOptions,
    warm: Option<&[f64]>,
) -> Result<HjbSolution> {
    jump_rvi(model, grid, opts, warm, None)
}

/// Gain of the fixed action table `policy` under jump dynamics.
pub fn evaluate_policy_jump(
    model: &ModelSpec,
    grid: &Grid,
    policy: &[usize],
    opts: &SolverOptions,
    warm: Option<&[f64]>,
) -> Result<HjbSolution> {
    if policy.len() != grid.len() || policy.iter().any(|&a| a >= grid.actions.len()) {
        return invalid("policy table does not match the grid");
    }
    jump_rvi(model, grid, opts, warm, Some(policy))
}

fn jump_rvi(
    model: &ModelSpec,
    grid: &Grid,
    opts: &SolverOptions,
    warm: Option<&[f64]>,
    fixed: Option<&[usize]>,
) -> Result<HjbSolution> {
    if model.state_dim() != grid.dim {
        return invalid("grid dimension does not match the model");
    }
    let (n, na, d) = (grid.len(), grid.actions.len(), grid.dim);
    let eps = model.epsilon;
    let op = JumpOperator::new(model, grid);
    let t = tables(model, grid);
    let mut means = vec![0.0; n * na * d];
    let mut x = vec![0.0; d];
    let limit = 3.0 * grid.radius();
    for i in 0..n {
        grid.coords_into(i, &mut x);
        for a in 0..na {
            let k = i * na + a;
            for j in 0..d {
                means[k * d + j] = x[j] + eps * t.drift[k * d + j];
            }
            let reach = op.reach(&means[k * d..(k + 1) * d]);
            if reach > limit {
                return Err(Error::GridTooSmall {
                    point: reach,
                    limit,
                });
            }
        }
    }
    let actions_at = |i: usize| -> std::ops::Range<usize> {
        match fixed {
            Some(p) => p[i]..p[i] + 1,
            None => 0..na,
        }
    };
    let update = |w: &[f64], i: usize| -> (f64, usize) {
        let mut best = (f64::NEG_INFINITY, 0);
        for a in actions_at(i) {
            let k = i * na + a;
            let v = op.expect(w, &means[k * d..(k + 1) * d]) + eps * t.reward[k];
            if v > best.0 {
                best = (v, a);
            }
        }
        best
    };
    let origin = grid.origin();
    let mut w = match warm {
        Some(w0) if w0.len() == n => w0.to_vec(),
        Some(_) => return invalid("warm start does not match the grid"),
        None => vec![0.0; n],
    };
    let mut next = vec![0.0; n];
    let mut history = Vec::new();
    for it in 1..=opts.max_iterations {
        next.par_iter_mut()
            .enumerate()
            .for_each(|(i, o)| *o = update(&w, i).0);
        let (lo, hi) = span(&next, &w);
        let residual = (hi - lo) / eps;
        if it % 100 == 0 {
            history.push(residual);
        }
        if residual <= opts.tol {
            let rho = 0.5 * (hi + lo) / eps;
            let anchor = next[origin];
            next.iter_mut().for_each(|v| *v -= anchor);
            let policy: Vec<usize> = (0..n).map(|i| update(&next, i).1).collect();
            let lipschitz_estimate = grid.max_slope(&next);
            return Ok(HjbSolution {
                kind: if fixed.is_some() {
                    SolverKind::PolicyEvaluation
                } else {
                    SolverKind::Jump
                },
                grid: grid.clone(),
                theta: model.theta.clone(),
                epsilon: eps,
                w: next,
                rho,
                policy,
                residual,
                iterations: it,
                lipschitz_estimate,
            });
        }
        let anchor = next[origin];
        for (wi, ni) in w.iter_mut().zip(&next) {
            *wi = ni - anchor;
        }
    }
    Err(Error::NonConvergence {
        solver: "jump relative value iteration",
        iterations: opts.max_iterations,
        residual: history.last().copied().unwrap_or(f64::NAN),
        history,
    })
}
