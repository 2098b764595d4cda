use super::ParamBox;
use crate::error::{invalid, Result};
use serde::{Deserialize, Serialize};

/// Penalty subtracted from the state reward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ActionCost {
    None,
    /// `weight · min(‖a‖², clamp)`.
    Quadratic {
        weight: f64,
        clamp: f64,
    },
    /// `weight · ‖a‖`.
    Absolute {
        weight: f64,
    },
}

impl ActionCost {
    #[inline]
    fn eval(&self, a: &[f64]) -> f64 {
        match self {
            ActionCost::None => 0.0,
            ActionCost::Quadratic { weight, clamp } => {
                weight * a.iter().map(|v| v * v).sum::<f64>().min(*clamp)
            }
            ActionCost::Absolute { weight } => weight * a.iter().map(|v| v * v).sum::<f64>().sqrt(),
        }
    }

    fn sup(&self, actions: &ParamBox) -> f64 {
        let r = actions.max_norm();
        match self {
            ActionCost::None => 0.0,
            ActionCost::Quadratic { weight, clamp } => weight.abs() * (r * r).min(*clamp),
            ActionCost::Absolute { weight } => weight.abs() * r,
        }
    }
}

/// Bounded, Lipschitz reward maps `r̄(x, a)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "id", rename_all = "lowercase")]
pub enum Reward {
    Constant {
        value: f64,
    },
    /// `amplitude · exp(-‖x - center‖² / width²) - cost(a)`.
    Bump {
        amplitude: f64,
        center: Vec<f64>,
        width: f64,
        action_cost: ActionCost,
    },
}

impl Reward {
    #[inline]
    pub fn eval(&self, x: &[f64], a: &[f64]) -> f64 {
        match self {
            Reward::Constant { value } => *value,
            Reward::Bump {
                amplitude,
                center,
                width,
                action_cost,
            } => {
                let r2: f64 = x.iter().zip(center).map(|(u, c)| (u - c) * (u - c)).sum();
                amplitude * (-r2 / (width * width)).exp() - action_cost.eval(a)
            }
        }
    }

    pub(crate) fn validate(&self, d: usize, _da: usize) -> Result<()> {
        match self {
            Reward::Constant { value } if !value.is_finite() => {
                invalid("reward constant must be finite")
            }
            Reward::Bump {
                center,
                width,
                amplitude,
                action_cost,
            } => {
                if center.len() != d {
                    return invalid("reward center must have the state dimension");
                }
                if !(*width > 0.0) || !amplitude.is_finite() {
                    return invalid("reward width must be positive and amplitude finite");
                }
                if let ActionCost::Quadratic { clamp, .. } = action_cost {
                    if !(*clamp >= 0.0) {
                        return invalid("quadratic action cost clamp must be nonnegative");
                    }
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// `sup |r̄|` over states and the action box.
    pub fn sup_abs(&self, actions: &ParamBox) -> f64 {
        match self {
            Reward::Constant { value } => value.abs(),
            Reward::Bump {
                amplitude,
                action_cost,
                ..
            } => amplitude.abs().max(action_cost.sup(actions)),
        }
    }

    /// Lipschitz constant of `x ↦ r̄(x, a)`.
    pub fn lipschitz_x(&self) -> f64 {
        match self {
            Reward::Constant { .. } => 0.0,
            // max of |d/dr A exp(-r²/w²)| is A √2 / w · e^{-1/2}
            Reward::Bump {
                amplitude, width, ..
            } => amplitude.abs() * (2.0f64).sqrt() / width * (-0.5f64).exp(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_at_origin_is_one() {
        let r = Reward::Bump {
            amplitude: 1.0,
            center: vec![0.0, 0.0],
            width: 1.0,
            action_cost: ActionCost::Quadratic {
                weight: 0.5,
                clamp: 1.0,
            },
        };
        assert_eq!(r.eval(&[0.0, 0.0], &[0.0]), 1.0);
        // cost saturates at the clamp
        assert_eq!(r.eval(&[0.0, 0.0], &[3.0]), 0.5);
    }

    #[test]
    fn lipschitz_bound_dominates_slopes() {
        let r = Reward::Bump {
            amplitude: 2.0,
            center: vec![1.0],
            width: 0.5,
            action_cost: ActionCost::None,
        };
        let lip = r.lipschitz_x();
        let mut worst: f64 = 0.0;
        for i in 0..4000 {
            let x = -3.0 + i as f64 * 1e-3 * 1.7;
            let h = 1e-6;
            worst = worst.max(((r.eval(&[x + h], &[0.0]) - r.eval(&[x], &[0.0])) / h).abs());
        }
        assert!(worst <= lip * (1.0 + 1e-5));
        assert!(worst >= 0.99 * lip);
    }
}
