//! Ergodic HJB of the limiting diffusion on a Markov-chain approximation:
//! upwind drift, centred diffusion, reflection at the grid boundary.
//!
//! In one dimension the chain is a birth–death process, so each policy is
//! evaluated exactly from its stationary law and Howard's policy iteration
//! terminates in a handful of steps. In two dimensions relative value
//! iteration runs on the uniformized chain.

use super::grid::Grid;
use super::solution::{HjbSolution, SolverKind, SolverOptions};
use crate::error::{invalid, Error, Result};
use crate::model::ModelSpec;
use rayon::prelude::*;

/// Drift and reward at every (node, action), node-major.
pub(crate) struct Tables {
    pub drift: Vec<f64>,
    pub reward: Vec<f64>,
}

pub(crate) fn tables(model: &ModelSpec, grid: &Grid) -> Tables {
    let (n, na, d) = (grid.len(), grid.actions.len(), grid.dim);
    let mut drift = vec![0.0; n * na * d];
    let mut reward = vec![0.0; n * na];
    let mut x = vec![0.0; d];
    for i in 0..n {
        grid.coords_into(i, &mut x);
        for (a, act) in grid.actions.iter().enumerate() {
            let k = i * na + a;
            model.drift_bar_into(&x, act, &mut drift[k * d..(k + 1) * d]);
            reward[k] = model.reward_bar(&x, act);
        }
    }
    Tables { drift, reward }
}

fn covariance(model: &ModelSpec) -> nalgebra::DMatrix<f64> {
    &model.sigma_bar * model.sigma_bar.transpose()
}

pub fn solve_diffusive(
    model: &ModelSpec,
    grid: &Grid,
    opts: &SolverOptions,
) -> Result<HjbSolution> {
    if model.state_dim() != grid.dim {
        return invalid("grid dimension does not match the model");
    }
    if grid.dim == 1 {
        policy_iteration_1d(model, grid, opts)
    } else {
        relative_value_iteration(model, grid, opts, None)
    }
}

/// Gain and increments `D_i = w_{i+1} - w_i` of the birth–death chain with
/// up rates `up`, down rates `dn` and reward `r`. The increments come from
/// the flux balance `up_i D_i - dn_i D_{i-1} + r_i - ρ = 0`, solved
/// forward left of the stationary mode and backward right of it so that
/// every recursion factor is below one.
pub fn birth_death_evaluate(up: &[f64], dn: &[f64], r: &[f64]) -> (f64, Vec<f64>) {
    let n = r.len();
    if n == 1 {
        return (r[0], Vec::new());
    }
    let mut lp = vec![0.0; n];
    for i in 0..n - 1 {
        lp[i + 1] = lp[i] + up[i].ln() - dn[i + 1].ln();
    }
    let mode = (0..n).fold(0, |m, i| if lp[i] > lp[m] { i } else { m });
    let top = lp[mode];
    let p: Vec<f64> = lp.iter().map(|v| (v - top).exp()).collect();
    let z: f64 = p.iter().sum();
    let rho = p.iter().zip(r).map(|(pi, ri)| pi * ri).sum::<f64>() / z;
    let g: Vec<f64> = r.iter().map(|v| v - rho).collect();
    let mut dvec = vec![0.0; n - 1];
    let mut s = 0.0;
    for i in 0..mode.min(n - 1) {
        s = if i == 0 {
            g[0]
        } else {
            g[i] + dn[i] / up[i - 1] * s
        };
        dvec[i] = -s / up[i];
    }
    let mut s = 0.0;
    for i in (mode..n - 1).rev() {
        s = up[i] / dn[i + 1] * (g[i + 1] + s);
        dvec[i] = s / up[i];
    }
    (rho, dvec)
}

fn policy_iteration_1d(
    model: &ModelSpec,
    grid: &Grid,
    opts: &SolverOptions,
) -> Result<HjbSolution> {
    let (n, na, h) = (grid.len(), grid.actions.len(), grid.spacing);
    let t = tables(model, grid);
    let diff = covariance(model)[(0, 0)] / (2.0 * h * h);
    let up_drift = |i: usize, a: usize| {
        if i + 1 < n {
            t.drift[i * na + a].max(0.0) / h
        } else {
            0.0
        }
    };
    let dn_drift = |i: usize, a: usize| {
        if i > 0 {
            (-t.drift[i * na + a]).max(0.0) / h
        } else {
            0.0
        }
    };
    let up_diff = |i: usize| if i + 1 < n { diff } else { 0.0 };
    let dn_diff = |i: usize| if i > 0 { diff } else { 0.0 };

    // Start from the myopic policy.
    let mut pol: Vec<usize> = (0..n)
        .map(|i| {
            (0..na).fold(0, |b, a| {
                if t.reward[i * na + a] > t.reward[i * na + b] {
                    a
                } else {
                    b
                }
            })
        })
        .collect();
    let hamiltonian = |i: usize, a: usize, dv: &[f64]| {
        let fwd = if i + 1 < n { dv[i] } else { 0.0 };
        let bwd = if i > 0 { dv[i - 1] } else { 0.0 };
        up_drift(i, a) * fwd - dn_drift(i, a) * bwd + t.reward[i * na + a]
    };
    let mut up = vec![0.0; n];
    let mut dn = vec![0.0; n];
    let mut r = vec![0.0; n];
    let mut history = Vec::new();
    for it in 1..=opts.max_iterations.max(1) {
        for i in 0..n {
            up[i] = up_diff(i) + up_drift(i, pol[i]);
            dn[i] = dn_diff(i) + dn_drift(i, pol[i]);
            r[i] = t.reward[i * na + pol[i]];
        }
        let (rho, dv) = birth_death_evaluate(&up, &dn, &r);
        history.push(rho);
        let mut changed = false;
        for i in 0..n {
            let cur = hamiltonian(i, pol[i], &dv);
            let (mut best, mut best_val) = (pol[i], cur);
            for a in 0..na {
                let v = hamiltonian(i, a, &dv);
                if v > best_val + 1e-12 * (1.0 + v.abs()) {
                    best = a;
                    best_val = v;
                }
            }
            if best != pol[i] {
                pol[i] = best;
                changed = true;
            }
        }
        if !changed {
            let mut w = vec![0.0; n];
            for i in 0..n - 1 {
                w[i + 1] = w[i] + dv[i];
            }
            let anchor = w[grid.origin()];
            w.iter_mut().for_each(|v| *v -= anchor);
            // Bellman residual of the discrete HJB at every node.
            let mut residual: f64 = 0.0;
            for i in 0..n {
                let fwd = if i + 1 < n { dv[i] } else { 0.0 };
                let bwd = if i > 0 { dv[i - 1] } else { 0.0 };
                let best = (0..na)
                    .map(|a| hamiltonian(i, a, &dv))
                    .fold(f64::NEG_INFINITY, f64::max);
                let val = best + up_diff(i) * fwd - dn_diff(i) * bwd;
                residual = residual.max((val - rho).abs());
            }
            if residual > opts.tol {
                return Err(Error::NonConvergence {
                    solver: "diffusive policy iteration",
                    iterations: it,
                    residual,
                    history,
                });
            }
            // Tie-break toward the lowest action index.
            for (i, p) in pol.iter_mut().enumerate() {
                let vals: Vec<f64> = (0..na).map(|a| hamiltonian(i, a, &dv)).collect();
                let m = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                *p = vals
                    .iter()
                    .position(|v| *v >= m - 1e-12 * (1.0 + m.abs()))
                    .unwrap_or(*p);
            }
            let lipschitz_estimate = grid.max_slope(&w);
            return Ok(HjbSolution {
                kind: SolverKind::Diffusive,
                grid: grid.clone(),
                theta: model.theta.clone(),
                epsilon: model.epsilon,
                w,
                rho,
                policy: pol,
                residual,
                iterations: it,
                lipschitz_estimate,
            });
        }
    }
    Err(Error::NonConvergence {
        solver: "diffusive policy iteration",
        iterations: opts.max_iterations,
        residual: f64::NAN,
        history,
    })
}

/// Outgoing rates of the approximating chain at `node` with drift `b`.
/// Diagonal moves carry the cross covariance; the scheme needs a
/// diagonally dominant covariance.
fn generator_row(
    grid: &Grid,
    node: usize,
    b: &[f64],
    cov: &[[f64; 2]; 2],
    out: &mut [(usize, f64); 8],
) -> usize {
    let (n, h) = (grid.axis_len(), grid.spacing);
    let idx = grid.unflat(node);
    let mut m = 0;
    let mut push = |di: [isize; 2], rate: f64| {
        if rate <= 0.0 {
            return;
        }
        let mut j = [0usize; 2];
        for k in 0..grid.dim {
            let v = idx[k] as isize + di[k];
            if v < 0 || v >= n as isize {
                return;
            }
            j[k] = v as usize;
        }
        out[m] = (grid.flat(&j[..grid.dim]), rate);
        m += 1;
    };
    let cross = if grid.dim == 2 { cov[0][1] } else { 0.0 };
    for k in 0..grid.dim {
        let base = (cov[k][k] - cross.abs()) / (2.0 * h * h);
        let mut e = [0isize; 2];
        e[k] = 1;
        push(e, base + b[k].max(0.0) / h);
        e[k] = -1;
        push(e, base + (-b[k]).max(0.0) / h);
    }
    if grid.dim == 2 {
        let c = cross.abs() / (2.0 * h * h);
        if cross > 0.0 {
            push([1, 1], c);
            push([-1, -1], c);
        } else if cross < 0.0 {
            push([1, -1], c);
            push([-1, 1], c);
        }
    }
    m
}

/// Relative value iteration on the uniformized chain, any dimension.
pub fn relative_value_iteration(
    model: &ModelSpec,
    grid: &Grid,
    opts: &SolverOptions,
    warm: Option<&[f64]>,
) -> Result<HjbSolution> {
    let (n, na, d) = (grid.len(), grid.actions.len(), grid.dim);
    let c = covariance(model);
    let mut cov = [[0.0; 2]; 2];
    for i in 0..d {
        for j in 0..d {
            cov[i][j] = c[(i, j)];
        }
    }
    if d == 2 && (cov[0][0] < cov[0][1].abs() || cov[1][1] < cov[0][1].abs()) {
        return invalid("diffusion matrix must be diagonally dominant for the grid scheme");
    }
    let t = tables(model, grid);
    let mut lambda: f64 = 0.0;
    let mut row = [(0usize, 0.0); 8];
    for i in 0..n {
        for a in 0..na {
            let k = i * na + a;
            let m = generator_row(grid, i, &t.drift[k * d..(k + 1) * d], &cov, &mut row);
            lambda = lambda.max(row[..m].iter().map(|e| e.1).sum());
        }
    }
    // Self-loop mass keeps the chain aperiodic.
    let lambda = 1.05 * lambda;
    let origin = grid.origin();
    let mut w = warm.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    let mut next = vec![0.0; n];
    let mut history = Vec::new();
    let update = |w: &[f64], i: usize| -> (f64, usize) {
        let mut row = [(0usize, 0.0); 8];
        let mut best = (f64::NEG_INFINITY, 0);
        for a in 0..na {
            let k = i * na + a;
            let m = generator_row(grid, i, &t.drift[k * d..(k + 1) * d], &cov, &mut row);
            let flow: f64 = row[..m].iter().map(|(j, q)| q * (w[*j] - w[i])).sum();
            let v = w[i] + (flow + t.reward[k]) / lambda;
            if v > best.0 {
                best = (v, a);
            }
        }
        best
    };
    for it in 1..=opts.max_iterations {
        next.par_iter_mut()
            .enumerate()
            .for_each(|(i, o)| *o = update(&w, i).0);
        let (lo, hi) = span(&next, &w);
        let residual = lambda * (hi - lo);
        if it % 100 == 0 {
            history.push(residual);
        }
        if residual <= opts.tol {
            let rho = lambda * 0.5 * (hi + lo);
            let anchor = next[origin];
            next.iter_mut().for_each(|v| *v -= anchor);
            let policy: Vec<usize> = (0..n).map(|i| update(&next, i).1).collect();
            let lipschitz_estimate = grid.max_slope(&next);
            return Ok(HjbSolution {
                kind: SolverKind::Diffusive,
                grid: grid.clone(),
                theta: model.theta.clone(),
                epsilon: model.epsilon,
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
        solver: "diffusive relative value iteration",
        iterations: opts.max_iterations,
        residual: history.last().copied().unwrap_or(f64::NAN),
        history,
    })
}

/// `(min, max)` of `a - b`.
pub(crate) fn span(a: &[f64], b: &[f64]) -> (f64, f64) {
    a.iter()
        .zip(b)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (x, y)| {
            let d = x - y;
            (lo.min(d), hi.max(d))
        })
}
