//! Parametric drift/reward families and their stability certificates.
//!
//! A [`ModelSpec`] is one parameter point together with everything needed to
//! simulate it: rescaled drift `μ̄_θ`, reward `r̄`, noise `Σ̄` and the clock
//! scale `ε`. The jump process steps with `μ = ε μ̄`, `Σ = √ε Σ̄`, `r = ε r̄`.

mod care;
mod config;
mod cover;
mod family;
mod reward;

pub use care::{
    generate_probes, lyapunov_from_vertices, solve_care, verify_contraction, ContractionProbe,
    ContractionReport, LyapunovSpec, Violation,
};
pub use config::{load_document, BoxConfig, ModelConfig};
pub use cover::log_cover_bound;
pub use family::{DriftFamily, LinearFamily, TanhFamily};
pub use reward::{ActionCost, Reward};

use crate::error::{invalid, Error, Result};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Axis-aligned box `[lo, hi]` used for parameter sets and action sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl ParamBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return invalid("box bounds must be nonempty and of equal length");
        }
        if lo
            .iter()
            .zip(&hi)
            .any(|(l, h)| !(l <= h) || !l.is_finite() || !h.is_finite())
        {
            return invalid("box bounds must be finite with lo <= hi");
        }
        Ok(Self { lo, hi })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dim()
            && p.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(v, (l, h))| *v >= *l && *v <= *h)
    }

    pub fn clamp(&self, p: &mut [f64]) {
        for (v, (l, h)) in p.iter_mut().zip(self.lo.iter().zip(&self.hi)) {
            *v = v.clamp(*l, *h);
        }
    }

    pub fn widths(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(l, h)| h - l).collect()
    }

    /// Largest side length (the ℓ∞ diameter).
    pub fn diameter(&self) -> f64 {
        self.widths().into_iter().fold(0.0, f64::max)
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| 0.5 * (l + h))
            .collect()
    }

    /// Largest Euclidean norm of a point of the box.
    pub fn max_norm(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| l.abs().max(h.abs()).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Tensor grid with `points` nodes per axis, in lexicographic order
    /// (first coordinate slowest). Degenerate axes contribute one node.
    pub fn grid(&self, points: usize) -> Vec<Vec<f64>> {
        let axes: Vec<Vec<f64>> = self
            .lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| {
                if points <= 1 || l == h {
                    vec![if l == h { *l } else { 0.5 * (l + h) }]
                } else {
                    (0..points)
                        .map(|i| l + (h - l) * i as f64 / (points - 1) as f64)
                        .collect()
                }
            })
            .collect();
        tensor(&axes)
    }

    /// All `2^dim` corners in lexicographic order.
    pub fn vertices(&self) -> Vec<Vec<f64>> {
        let axes: Vec<Vec<f64>> = self
            .lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| if l == h { vec![*l] } else { vec![*l, *h] })
            .collect();
        tensor(&axes)
    }
}

pub(crate) fn tensor(axes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = vec![Vec::new()];
    for axis in axes {
        let mut next = Vec::with_capacity(out.len() * axis.len());
        for prefix in &out {
            for v in axis {
                let mut p = prefix.clone();
                p.push(*v);
                next.push(p);
            }
        }
        out = next;
    }
    out
}

/// Family-level constants that do not depend on the particular θ.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FamilyMeta {
    pub family: DriftFamily,
    pub theta_bounds: ParamBox,
    pub action_box: ParamBox,
    pub lipschitz_l0: f64,
}

impl FamilyMeta {
    pub fn log_cover(&self, state_radius: f64, tol: f64) -> f64 {
        log_cover_bound(self, state_radius, tol)
    }
}

/// A parameter point of a family plus the reward, noise and clock scale.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub family: DriftFamily,
    pub theta: Vec<f64>,
    pub theta_bounds: ParamBox,
    pub reward: Reward,
    pub sigma_bar: DMatrix<f64>,
    pub epsilon: f64,
    pub action_box: ParamBox,
    sigma_op: f64,
    sqrt_eps: f64,
}

impl ModelSpec {
    pub fn new(
        family: DriftFamily,
        theta: Vec<f64>,
        theta_bounds: ParamBox,
        reward: Reward,
        sigma_bar: DMatrix<f64>,
        epsilon: f64,
        action_box: ParamBox,
    ) -> Result<Self> {
        let d = family.state_dim();
        if theta.len() != family.theta_dim() || theta_bounds.dim() != family.theta_dim() {
            return invalid(format!(
                "{} family expects {} parameters",
                family.id(),
                family.theta_dim()
            ));
        }
        if !theta.iter().all(|v| v.is_finite()) {
            return invalid("theta must be finite");
        }
        if action_box.dim() != family.action_dim() {
            return invalid(format!(
                "action box must have dimension {}",
                family.action_dim()
            ));
        }
        if sigma_bar.nrows() != d || sigma_bar.ncols() != d {
            return invalid(format!("sigma_bar must be {d}x{d}"));
        }
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return invalid("epsilon must lie in (0, 1]");
        }
        let cov = &sigma_bar * sigma_bar.transpose();
        let varsigma = cov.symmetric_eigenvalues().min();
        if !(varsigma > 1e-12) {
            return invalid("sigma_bar must have full rank");
        }
        reward.validate(d, family.action_dim())?;
        family.validate_box(&theta_bounds)?;
        let sigma_op = sigma_bar.clone().singular_values().max();
        Ok(Self {
            family,
            theta,
            theta_bounds,
            reward,
            sigma_bar,
            epsilon,
            action_box,
            sigma_op,
            sqrt_eps: epsilon.sqrt(),
        })
    }

    /// The 1-D linear benchmark: `μ̄ = A x + B a` with `θ* = (-1, 1)`,
    /// `Σ̄ = 1`, actions in `[-1, 1]` and a Gaussian bump reward centred at 1
    /// with a clamped quadratic action cost.
    pub fn benchmark_linear_1d(epsilon: f64) -> Self {
        Self::new(
            DriftFamily::Linear(LinearFamily {
                state_dim: 1,
                action_dim: 1,
            }),
            vec![-1.0, 1.0],
            ParamBox {
                lo: vec![-2.0, 0.25],
                hi: vec![-0.5, 1.75],
            },
            Reward::Bump {
                amplitude: 1.0,
                center: vec![1.0],
                width: 1.0,
                action_cost: ActionCost::Quadratic {
                    weight: 0.25,
                    clamp: 1.0,
                },
            },
            DMatrix::from_element(1, 1, 1.0),
            epsilon,
            ParamBox {
                lo: vec![-1.0],
                hi: vec![1.0],
            },
        )
        .expect("benchmark is valid")
    }

    pub fn state_dim(&self) -> usize {
        self.family.state_dim()
    }

    pub fn action_dim(&self) -> usize {
        self.family.action_dim()
    }

    pub fn family_id(&self) -> &'static str {
        self.family.id()
    }

    pub fn sigma_op(&self) -> f64 {
        self.sigma_op
    }

    pub fn sqrt_epsilon(&self) -> f64 {
        self.sqrt_eps
    }

    pub fn with_theta(&self, theta: &[f64]) -> Self {
        assert_eq!(theta.len(), self.theta.len());
        let mut m = self.clone();
        m.theta = theta.to_vec();
        m
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return invalid("epsilon must lie in (0, 1]");
        }
        let mut m = self.clone();
        m.epsilon = epsilon;
        m.sqrt_eps = epsilon.sqrt();
        Ok(m)
    }

    /// `μ̄_θ(x, a)` written into `out`; no finiteness check.
    #[inline]
    pub fn drift_bar_into(&self, x: &[f64], a: &[f64], out: &mut [f64]) {
        self.family.drift_bar_into(&self.theta, x, a, out);
    }

    #[inline]
    pub fn reward_bar(&self, x: &[f64], a: &[f64]) -> f64 {
        self.reward.eval(x, a)
    }

    /// Checked drift evaluation.
    pub fn eval_drift(&self, x: &[f64], a: &[f64]) -> Result<Vec<f64>> {
        self.check_args(x, a)?;
        let mut out = vec![0.0; self.state_dim()];
        self.drift_bar_into(x, a, &mut out);
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::ModelFault(format!(
                "non-finite drift at x={x:?}, a={a:?}"
            )));
        }
        Ok(out)
    }

    /// Checked reward evaluation, including `|r̄| <= L₀`.
    pub fn eval_reward(&self, x: &[f64], a: &[f64]) -> Result<f64> {
        self.check_args(x, a)?;
        let r = self.reward_bar(x, a);
        if !r.is_finite() {
            return Err(Error::ModelFault(format!(
                "non-finite reward at x={x:?}, a={a:?}"
            )));
        }
        if r.abs() > self.lipschitz_l0() {
            return Err(Error::ModelFault(format!("reward {r} exceeds L0")));
        }
        Ok(r)
    }

    fn check_args(&self, x: &[f64], a: &[f64]) -> Result<()> {
        if x.len() != self.state_dim() || a.len() != self.action_dim() {
            return invalid("state or action has the wrong dimension");
        }
        if x.iter().chain(a).any(|v| !v.is_finite()) {
            return Err(Error::ModelFault("non-finite argument".into()));
        }
        Ok(())
    }

    /// One event of the jump process: `x + ε μ̄(x,a) + √ε Σ̄ ξ`.
    #[inline]
    pub fn step_into(&self, x: &[f64], a: &[f64], xi: &[f64], out: &mut [f64]) {
        let d = x.len();
        self.drift_bar_into(x, a, out);
        for i in 0..d {
            let mut noise = 0.0;
            for j in 0..d {
                noise += self.sigma_bar[(i, j)] * xi[j];
            }
            out[i] = x[i] + self.epsilon * out[i] + self.sqrt_eps * noise;
        }
    }

    /// Constant `L₀` of the regularity assumption, uniform over the
    /// parameter box and the action box, and strictly above `‖Σ̄‖`.
    pub fn lipschitz_l0(&self) -> f64 {
        let drift = self
            .family
            .growth_plus_lipschitz(&self.theta_bounds, &self.action_box);
        let reward = self.reward.sup_abs(&self.action_box) + self.reward.lipschitz_x();
        let base = (drift + reward).max(self.sigma_op);
        base * (1.0 + 1e-9) + 1e-12
    }

    pub fn meta(&self) -> FamilyMeta {
        FamilyMeta {
            family: self.family.clone(),
            theta_bounds: self.theta_bounds.clone(),
            action_box: self.action_box.clone(),
            lipschitz_l0: self.lipschitz_l0(),
        }
    }

    /// Lyapunov certificate valid uniformly over the parameter box.
    pub fn family_lyapunov(&self) -> Result<LyapunovSpec> {
        let (p, vertices) = self.family.certificate_inputs(&self.theta_bounds)?;
        lyapunov_from_vertices(&p, &vertices)
    }

    /// Lyapunov certificate for the current θ only.
    pub fn point_lyapunov(&self) -> Result<LyapunovSpec> {
        let single = ParamBox {
            lo: self.theta.clone(),
            hi: self.theta.clone(),
        };
        let (p, vertices) = self.family.certificate_inputs(&single)?;
        lyapunov_from_vertices(&p, &vertices)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_is_lexicographic_and_contains_corners() {
        let b = ParamBox::new(vec![0.0, -1.0], vec![1.0, 1.0]).unwrap();
        let g = b.grid(3);
        assert_eq!(g.len(), 9);
        assert_eq!(g[0], vec![0.0, -1.0]);
        assert_eq!(g[1], vec![0.0, 0.0]);
        assert_eq!(g[8], vec![1.0, 1.0]);
        assert_eq!(b.vertices().len(), 4);
    }

    #[test]
    fn step_substitution() {
        let m = ModelSpec::new(
            DriftFamily::Linear(LinearFamily {
                state_dim: 1,
                action_dim: 1,
            }),
            vec![-1.0, 1.0],
            ParamBox::new(vec![-2.0, 0.0], vec![-0.5, 2.0]).unwrap(),
            Reward::Constant { value: 0.0 },
            DMatrix::from_element(1, 1, 1.0),
            1.0,
            ParamBox::new(vec![-1.0], vec![1.0]).unwrap(),
        )
        .unwrap();
        let mut out = [0.0];
        m.step_into(&[2.0], &[1.0], &[0.0], &mut out);
        assert_eq!(out[0], 1.0);
    }

    #[test]
    fn benchmark_constants() {
        let m = ModelSpec::benchmark_linear_1d(0.1);
        let l0 = m.lipschitz_l0();
        // growth 2 + lipschitz 2 + sup|r| 1 + reward slope sqrt(2/e)
        let expect = 4.0 + 1.0 + (2.0f64 / std::f64::consts::E).sqrt();
        assert!((l0 - expect).abs() < 1e-8 * expect);
        assert!(l0 > m.sigma_op());
    }

    #[test]
    fn rejects_degenerate_noise() {
        let m = ModelSpec::new(
            DriftFamily::Linear(LinearFamily {
                state_dim: 1,
                action_dim: 1,
            }),
            vec![-1.0, 1.0],
            ParamBox::new(vec![-2.0, 0.0], vec![-0.5, 2.0]).unwrap(),
            Reward::Constant { value: 0.0 },
            DMatrix::from_element(1, 1, 0.0),
            0.5,
            ParamBox::new(vec![-1.0], vec![1.0]).unwrap(),
        );
        assert!(matches!(m, Err(Error::InvalidConfig(_))));
    }
}
