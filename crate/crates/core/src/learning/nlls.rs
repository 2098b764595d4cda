//! Box-constrained nonlinear least squares by multi-start damped
//! Gauss–Newton, with an exact active-set solver for linear families.

use super::design::{DesignLog, LinearStats};
use crate::error::{invalid, Result};
use crate::model::{DriftFamily, ParamBox};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitOptions {
    /// Coarse grid nodes per parameter axis used as starting points.
    pub grid_points: usize,
    pub max_iterations: usize,
    /// Relative tolerance on the projected gradient.
    pub gradient_tol: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            grid_points: 3,
            max_iterations: 200,
            gradient_tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FitResult {
    pub theta: Vec<f64>,
    pub objective: f64,
    /// False when the best start hit the iteration cap; `theta` is then
    /// its last iterate.
    pub converged: bool,
    pub iterations: usize,
    /// Objective at `theta` is no larger than at every coarse grid node.
    pub grid_dominated: bool,
    pub best_grid_objective: f64,
    /// Which start produced `theta` (grid nodes first, warm start last).
    pub start_index: usize,
}

/// The least-squares objective `J(θ) = Σ ‖Δᵢ - ε μ̄_θ(xᵢ, aᵢ)‖²`.
pub enum Objective<'a> {
    Linear {
        stats: &'a LinearStats,
        epsilon: f64,
    },
    General {
        family: &'a DriftFamily,
        design: &'a DesignLog,
        upto: usize,
        epsilon: f64,
    },
}

impl Objective<'_> {
    pub fn value(&self, theta: &[f64]) -> f64 {
        match self {
            Objective::Linear { stats, epsilon } => stats.objective(theta, *epsilon),
            Objective::General {
                family,
                design,
                upto,
                epsilon,
            } => {
                let d = design.state_dim;
                let mut mu = vec![0.0; d];
                let mut s = 0.0;
                for i in 0..*upto {
                    family.drift_bar_into(theta, design.state(i), design.action(i), &mut mu);
                    for (m, inc) in mu.iter().zip(design.increment(i)) {
                        let r = inc - epsilon * m;
                        s += r * r;
                    }
                }
                s
            }
        }
    }

    /// Value, gradient and Gauss–Newton Hessian.
    fn linearize(&self, theta: &[f64]) -> (f64, DVector<f64>, DMatrix<f64>) {
        let p = theta.len();
        match self {
            Objective::Linear { stats, epsilon } => {
                let t = DVector::from_column_slice(theta);
                let g = (&stats.gram * &t * (*epsilon) - &stats.cross) * (2.0 * epsilon);
                let h = &stats.gram * (2.0 * epsilon * epsilon);
                (stats.objective(theta, *epsilon), g, h)
            }
            Objective::General {
                family,
                design,
                upto,
                epsilon,
            } => {
                let d = design.state_dim;
                let mut mu = vec![0.0; d];
                let mut jac = vec![0.0; d * p];
                let mut val = 0.0;
                let mut g = DVector::zeros(p);
                let mut h = DMatrix::zeros(p, p);
                for i in 0..*upto {
                    let (x, a) = (design.state(i), design.action(i));
                    family.drift_bar_into(theta, x, a, &mut mu);
                    family.theta_jacobian_into(theta, x, a, &mut jac);
                    for r in 0..d {
                        let res = design.increment(i)[r] - epsilon * mu[r];
                        val += res * res;
                        let row = &jac[r * p..(r + 1) * p];
                        for j in 0..p {
                            g[j] -= 2.0 * epsilon * row[j] * res;
                            for k in 0..p {
                                h[(j, k)] += 2.0 * epsilon * epsilon * row[j] * row[k];
                            }
                        }
                    }
                }
                (val, g, h)
            }
        }
    }
}

/// Projected Levenberg–Marquardt from one start. Returns
/// `(theta, objective, iterations, converged)`.
fn descend(
    obj: &Objective,
    bounds: &ParamBox,
    start: &[f64],
    opts: &FitOptions,
) -> (Vec<f64>, f64, usize, bool) {
    let p = start.len();
    let mut theta = start.to_vec();
    bounds.clamp(&mut theta);
    let (mut val, mut g, mut h) = obj.linearize(&theta);
    let mut lambda = 0.0;
    for it in 0..opts.max_iterations {
        let free: Vec<usize> = (0..p)
            .filter(|&j| {
                !((theta[j] <= bounds.lo[j] && g[j] > 0.0)
                    || (theta[j] >= bounds.hi[j] && g[j] < 0.0))
            })
            .collect();
        let pg: f64 = free.iter().map(|&j| g[j] * g[j]).sum::<f64>().sqrt();
        let scale = 1.0 + val + h.diagonal().amax();
        if free.is_empty() || pg <= opts.gradient_tol * scale {
            return (theta, val, it, true);
        }
        let mut accepted = false;
        for _ in 0..40 {
            let m = free.len();
            let mut hf = DMatrix::zeros(m, m);
            let mut gf = DVector::zeros(m);
            for (a, &j) in free.iter().enumerate() {
                gf[a] = g[j];
                for (b, &k) in free.iter().enumerate() {
                    hf[(a, b)] = h[(j, k)];
                }
                hf[(a, a)] += lambda * (h[(j, j)].abs() + 1e-12 * scale);
            }
            let step = hf
                .clone()
                .cholesky()
                .map(|c| c.solve(&(-&gf)))
                .or_else(|| hf.lu().solve(&(-&gf)));
            if let Some(step) = step {
                let mut cand = theta.clone();
                for (a, &j) in free.iter().enumerate() {
                    cand[j] += step[a];
                }
                bounds.clamp(&mut cand);
                let cv = obj.value(&cand);
                if cv < val {
                    let gain = val - cv;
                    theta = cand;
                    let lin = obj.linearize(&theta);
                    val = lin.0;
                    g = lin.1;
                    h = lin.2;
                    lambda *= 0.1;
                    if lambda < 1e-12 {
                        lambda = 0.0;
                    }
                    accepted = true;
                    if gain <= 1e-16 * (1.0 + val) {
                        return (theta, val, it + 1, true);
                    }
                    break;
                }
            }
            lambda = if lambda == 0.0 { 1e-6 } else { lambda * 10.0 };
        }
        if !accepted {
            // No descent direction improves the objective at working precision.
            return (theta, val, it + 1, true);
        }
    }
    (theta, val, opts.max_iterations, false)
}

/// Multi-start fit over the parameter box. Starts are the coarse grid nodes
/// in lexicographic order followed by the optional warm start; the lowest
/// index wins ties.
pub fn fit_nlls(
    family: &DriftFamily,
    bounds: &ParamBox,
    design: &DesignLog,
    upto: usize,
    epsilon: f64,
    warm: Option<&[f64]>,
    opts: &FitOptions,
) -> Result<FitResult> {
    let upto = upto.min(design.len());
    if upto == 0 {
        return invalid("least squares needs at least one transition");
    }
    let stats;
    let obj = if family.is_linear_in_theta() {
        stats = LinearStats::from_design(family, design, upto);
        Objective::Linear {
            stats: &stats,
            epsilon,
        }
    } else {
        Objective::General {
            family,
            design,
            upto,
            epsilon,
        }
    };
    fit_objective(&obj, bounds, warm, opts)
}

pub fn fit_objective(
    obj: &Objective,
    bounds: &ParamBox,
    warm: Option<&[f64]>,
    opts: &FitOptions,
) -> Result<FitResult> {
    let mut starts = bounds.grid(opts.grid_points.max(1));
    let best_grid_objective = starts
        .iter()
        .map(|s| obj.value(s))
        .fold(f64::INFINITY, f64::min);
    if let Some(w) = warm {
        if w.len() != bounds.dim() {
            return invalid("warm start has the wrong dimension");
        }
        starts.push(w.to_vec());
    }
    let mut best: Option<(Vec<f64>, f64, usize, bool, usize)> = None;
    for (idx, s) in starts.iter().enumerate() {
        let (theta, val, iters, conv) = descend(obj, bounds, s, opts);
        if best.as_ref().is_none_or(|b| val < b.1) {
            best = Some((theta, val, iters, conv, idx));
        }
    }
    let (theta, objective, iterations, converged, start_index) = best.expect("at least one start");
    Ok(FitResult {
        grid_dominated: objective <= best_grid_objective + 1e-9 * (1.0 + best_grid_objective.abs()),
        theta,
        objective,
        converged,
        iterations,
        best_grid_objective,
        start_index,
    })
}

/// Exact minimizer of `ε²θᵀGθ - 2εbᵀθ` over a box by enumerating which
/// coordinates sit at their lower bound, upper bound or are free. Returns
/// `None` when every candidate system is singular.
pub fn box_least_squares(stats: &LinearStats, epsilon: f64, bounds: &ParamBox) -> Option<Vec<f64>> {
    let p = bounds.dim();
    let q = &stats.gram * (epsilon * epsilon);
    let lin = &stats.cross * epsilon;
    let mut best: Option<(Vec<f64>, f64)> = None;
    let combos = 3usize.pow(p as u32);
    for code in 0..combos {
        let mut c = code;
        let mut state = vec![0u8; p];
        for s in state.iter_mut() {
            *s = (c % 3) as u8;
            c /= 3;
        }
        let mut theta = vec![0.0; p];
        let free: Vec<usize> = (0..p).filter(|&j| state[j] == 0).collect();
        for j in 0..p {
            theta[j] = match state[j] {
                1 => bounds.lo[j],
                2 => bounds.hi[j],
                _ => 0.0,
            };
        }
        if !free.is_empty() {
            let m = free.len();
            let mut qf = DMatrix::zeros(m, m);
            let mut rhs = DVector::zeros(m);
            for (a, &j) in free.iter().enumerate() {
                rhs[a] = lin[j];
                for k in 0..p {
                    if state[k] != 0 {
                        rhs[a] -= q[(j, k)] * theta[k];
                    }
                }
                for (b, &k) in free.iter().enumerate() {
                    qf[(a, b)] = q[(j, k)];
                }
            }
            let Some(chol) = qf.cholesky() else { continue };
            let sol = chol.solve(&rhs);
            for (a, &j) in free.iter().enumerate() {
                theta[j] = sol[a];
            }
            if !free
                .iter()
                .all(|&j| theta[j] >= bounds.lo[j] && theta[j] <= bounds.hi[j])
            {
                continue;
            }
        }
        let t = DVector::from_column_slice(&theta);
        let val = (t.transpose() * &q * &t)[0] - 2.0 * lin.dot(&t);
        if best.as_ref().is_none_or(|b| val < b.1) {
            best = Some((theta, val));
        }
    }
    best.map(|b| b.0)
}

/// Fit for a linear-in-θ family from its sufficient statistics, using the
/// exact box solver and falling back to descent when it finds nothing.
pub fn fit_linear(
    stats: &LinearStats,
    epsilon: f64,
    bounds: &ParamBox,
    warm: Option<&[f64]>,
    opts: &FitOptions,
) -> Result<FitResult> {
    let obj = Objective::Linear { stats, epsilon };
    match box_least_squares(stats, epsilon, bounds) {
        Some(theta) => {
            let best_grid_objective = bounds
                .grid(opts.grid_points.max(1))
                .iter()
                .map(|s| obj.value(s))
                .fold(f64::INFINITY, f64::min);
            let objective = obj.value(&theta);
            Ok(FitResult {
                grid_dominated: objective
                    <= best_grid_objective + 1e-9 * (1.0 + best_grid_objective.abs()),
                theta,
                objective,
                converged: true,
                iterations: 0,
                best_grid_objective,
                start_index: 0,
            })
        }
        None => fit_objective(&obj, bounds, warm, opts),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{LinearFamily, TanhFamily};

    fn linear() -> DriftFamily {
        DriftFamily::Linear(LinearFamily {
            state_dim: 1,
            action_dim: 1,
        })
    }

    #[test]
    fn noiseless_linear_data_is_interpolated() {
        let f = linear();
        let truth = [-1.2, 0.7];
        let eps = 0.1;
        let mut design = DesignLog::new(1, 1);
        for (x, a) in [(0.5, 1.0), (-1.0, 0.3), (2.0, -0.4)] {
            let mu = f.drift_bar(&truth, &[x], &[a]);
            design.push(&[x], &[a], &[x + eps * mu[0]]);
        }
        let bounds = ParamBox::new(vec![-2.0, 0.0], vec![0.0, 2.0]).unwrap();
        let fit = fit_nlls(&f, &bounds, &design, 3, eps, None, &FitOptions::default()).unwrap();
        assert!(fit.converged && fit.grid_dominated);
        for (a, b) in fit.theta.iter().zip(&truth) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn active_bound_is_respected() {
        let f = linear();
        let eps = 1.0;
        let mut design = DesignLog::new(1, 1);
        for (x, a) in [(1.0, 0.0), (0.0, 1.0)] {
            design.push(&[x], &[a], &[x + 3.0 * x + 0.5 * a]);
        }
        let bounds = ParamBox::new(vec![-2.0, 0.0], vec![0.0, 2.0]).unwrap();
        let fit = fit_nlls(&f, &bounds, &design, 2, eps, None, &FitOptions::default()).unwrap();
        assert!((fit.theta[0] - 0.0).abs() < 1e-12);
        assert!((fit.theta[1] - 0.5).abs() < 1e-10);
        let stats = LinearStats::from_design(&f, &design, 2);
        let exact = box_least_squares(&stats, eps, &bounds).unwrap();
        assert!((exact[0] - 0.0).abs() < 1e-15 && (exact[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn tanh_noiseless_fit() {
        let f = DriftFamily::Tanh(TanhFamily { c: 2.0, b: 1.0 });
        let truth = [0.8, 1.5];
        let eps = 0.1;
        let mut design = DesignLog::new(1, 1);
        for i in 0..40 {
            let x = -2.0 + 0.1 * i as f64;
            let a = (i % 3) as f64 - 1.0;
            let mu = f.drift_bar(&truth, &[x], &[a]);
            design.push(&[x], &[a], &[x + eps * mu[0]]);
        }
        let bounds = ParamBox::new(vec![-1.0, 0.0], vec![1.0, 1.9]).unwrap();
        let fit = fit_nlls(&f, &bounds, &design, 40, eps, None, &FitOptions::default()).unwrap();
        assert!(fit.objective < 1e-20, "{fit:?}");
        assert!((fit.theta[0] - truth[0]).abs() < 1e-7 && (fit.theta[1] - truth[1]).abs() < 1e-7);
    }
}
