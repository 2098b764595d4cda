//! Closed-form radii: the confidence radius `β_n(δ)`, the adaptive state
//! bound `H_δ(n)` and the Poisson clock envelope.

use crate::model::{FamilyMeta, LyapunovSpec, ModelSpec};
use serde::{Deserialize, Serialize};
use std::f64::consts::{E, PI};

/// Confidence radius `β_n(δ)` (in units of the ε-scaled drift `μ = ε μ̄`).
///
/// `log_cover` is `log 𝒩` for the cover at tolerance `ε‖Σ̄‖²/n` over the ball
/// of radius `h`. The logarithm `κ_n` is floored at zero: its argument can
/// drop below one for tiny `n ε`, and a larger radius is always admissible.
pub fn beta_n(
    n: usize,
    delta: f64,
    epsilon: f64,
    sigma_norm: f64,
    log_cover: f64,
    h: f64,
    l0: f64,
) -> f64 {
    assert!(n >= 1, "beta_n needs n >= 1");
    assert!(delta > 0.0 && delta < 1.0, "delta must lie in (0, 1)");
    let beta0 = epsilon.sqrt();
    let n = n as f64;
    let pi2 = PI * PI;
    let kappa = ((2.0 * pi2 * n * n * epsilon / (3.0 * delta)).ln()
        + log_cover
        + (sigma_norm * sigma_norm + 8.0 * l0 * l0 * (1.0 + h)).ln())
    .max(0.0);
    let first = (2.0 * (4.0 * pi2 * n.powi(3) / (3.0 * delta)).ln()).sqrt();
    let second = (2.0 * epsilon.sqrt() * kappa / sigma_norm).sqrt();
    let inner = (1.0 + 2.0 * (first + second)).sqrt() + kappa.sqrt();
    beta0.max(2.0 * epsilon.sqrt() * sigma_norm * inner)
}

/// Constants entering `H_δ(n)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StateBound {
    pub ell_v: f64,
    pub l_v: f64,
    pub m_v: f64,
    pub m_v_prime: f64,
    pub c_v: f64,
    pub l0: f64,
    pub sigma_op: f64,
    pub dim: usize,
    pub x0_norm: f64,
}

impl StateBound {
    pub fn new(model: &ModelSpec, lyap: &LyapunovSpec, x0: &[f64]) -> Self {
        Self {
            ell_v: lyap.ell_v,
            l_v: lyap.l_v,
            m_v: lyap.m_v,
            m_v_prime: lyap.m_v_prime,
            c_v: lyap.c_v,
            l0: model.lipschitz_l0(),
            sigma_op: model.sigma_op(),
            dim: model.state_dim(),
            x0_norm: x0.iter().map(|v| v * v).sum::<f64>().sqrt(),
        }
    }

    /// `𝔠'_𝒱 = M_𝒱 L₀ (1 + ‖Σ̄‖√d) + 2 M_𝒱 ‖Σ̄‖ √d + M'_𝒱 ‖Σ̄‖² / 2`.
    pub fn c_v_prime(&self) -> f64 {
        let sd = (self.dim as f64).sqrt();
        self.m_v * self.l0 * (1.0 + self.sigma_op * sd)
            + 2.0 * self.m_v * self.sigma_op * sd
            + 0.5 * self.m_v_prime * self.sigma_op * self.sigma_op
    }

    /// `C_H = L_𝒱 ((1 + L₀) ‖Σ̄‖ √(8d/e) + 1 + ‖Σ̄‖ √d)`.
    pub fn c_h(&self) -> f64 {
        let d = self.dim as f64;
        self.l_v
            * ((1.0 + self.l0) * self.sigma_op * (8.0 * d / E).sqrt()
                + 1.0
                + self.sigma_op * d.sqrt())
    }

    /// `H_δ(n)`, nondecreasing in `n` and in `1/δ`.
    pub fn h_delta(&self, n: usize, delta: f64) -> f64 {
        let n1 = n as f64 + 1.0;
        let log_term = (PI * PI * n1.powi(3) / (6.0 * delta)).ln();
        (self.c_h() + self.l_v * self.x0_norm) / self.ell_v
            + self.c_v_prime() / (self.ell_v * self.c_v)
            + self.m_v / self.ell_v * self.sigma_op * (2.0 / self.c_v * log_term).sqrt()
    }
}

/// Envelope `2√(εT log(2/δ)) ∨ 2ε log(2/δ)` on `|ε N_T - T|`.
pub fn clock_envelope(epsilon: f64, horizon: f64, delta: f64) -> f64 {
    let l = (2.0 / delta).ln();
    (2.0 * (epsilon * horizon * l).sqrt()).max(2.0 * epsilon * l)
}

/// Everything needed to evaluate `β_n(δ)` along a run.
#[derive(Debug, Clone)]
pub struct RadiusSchedule {
    pub delta: f64,
    pub epsilon: f64,
    pub sigma_op: f64,
    pub l0: f64,
    pub meta: FamilyMeta,
    pub state_bound: StateBound,
}

impl RadiusSchedule {
    pub fn new(model: &ModelSpec, lyap: &LyapunovSpec, x0: &[f64], delta: f64) -> Self {
        Self {
            delta,
            epsilon: model.epsilon,
            sigma_op: model.sigma_op(),
            l0: model.lipschitz_l0(),
            meta: model.meta(),
            state_bound: StateBound::new(model, lyap, x0),
        }
    }

    pub fn h(&self, n: usize) -> f64 {
        self.state_bound.h_delta(n, self.delta)
    }

    /// `log 𝒩` at event count `n`: cover of `μ = ε μ̄` at tolerance
    /// `ε‖Σ̄‖²/n`, i.e. of `μ̄` at `‖Σ̄‖²/n`, on the ball of radius `H_δ(n)`.
    pub fn log_cover(&self, n: usize) -> f64 {
        let tol = self.sigma_op * self.sigma_op / n.max(1) as f64;
        self.meta.log_cover(self.h(n), tol)
    }

    /// `β_n(δ)`; `β_0 = √ε` when no data has been seen.
    pub fn beta(&self, n: usize) -> f64 {
        if n == 0 {
            return self.epsilon.sqrt();
        }
        beta_n(
            n,
            self.delta,
            self.epsilon,
            self.sigma_op,
            self.log_cover(n),
            self.h(n),
            self.l0,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn envelope_switches_branch() {
        assert!(
            (clock_envelope(0.25, 100.0, 0.05) - 2.0 * (25.0 * (40.0f64).ln()).sqrt()).abs()
                < 1e-12
        );
        assert!((clock_envelope(1.0, 1e-6, 0.05) - 2.0 * (40.0f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn beta_floor() {
        // Large δ close to 1 and tiny ε still respect β₀ = √ε.
        let b = beta_n(1, 0.99, 1e-6, 1.0, 0.0, 1.0, 1.0);
        assert!(b >= 1e-3);
    }

    #[test]
    fn beta_regression() {
        // Independent transcription, log 𝒩 = 0.
        let b = beta_n(1, 0.5, 0.25, 1.0, 0.0, 1.0, 1.0);
        assert!((b - 5.188288882684175).abs() < 1e-12, "{b}");
    }

    #[test]
    fn h_delta_regression() {
        let sb = StateBound {
            ell_v: 1.0,
            l_v: 1.0,
            m_v: 1.0,
            m_v_prime: 1.0,
            c_v: 1.0,
            l0: 1.0,
            sigma_op: 1.0,
            dim: 1,
            x0_norm: 0.0,
        };
        assert!((sb.c_h() - 5.431055539842827).abs() < 1e-12);
        assert!((sb.c_v_prime() - 4.5).abs() < 1e-15);
        assert!((sb.h_delta(1, 0.5) - 12.48851092545976).abs() < 1e-12);
    }
}
