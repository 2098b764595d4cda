use super::design::DesignLog;
use crate::model::DriftFamily;
use serde::Serialize;

/// Realized prediction errors `Σ ‖μ_θₙ(zₙ) - μ_θ*(zₙ)‖` and `Σ ‖·‖²`.
#[derive(Debug, Clone, Default, Serialize)]
pub struct PredictionErrors {
    pub first_order: f64,
    pub second_order: f64,
    /// Running first-order sum after each transition.
    pub first_order_path: Vec<f64>,
}

/// `thetas[i]` is the parameter in force at transition `i`.
pub fn prediction_errors(
    family: &DriftFamily,
    epsilon: f64,
    design: &DesignLog,
    thetas: &[Vec<f64>],
    theta_star: &[f64],
) -> PredictionErrors {
    let d = design.state_dim;
    let (mut u, mut v) = (vec![0.0; d], vec![0.0; d]);
    let mut out = PredictionErrors::default();
    for (i, th) in thetas.iter().enumerate().take(design.len()) {
        family.drift_bar_into(th, design.state(i), design.action(i), &mut u);
        family.drift_bar_into(theta_star, design.state(i), design.action(i), &mut v);
        let sq: f64 = u
            .iter()
            .zip(&v)
            .map(|(p, q)| (epsilon * (p - q)).powi(2))
            .sum();
        out.first_order += sq.sqrt();
        out.second_order += sq;
        out.first_order_path.push(out.first_order);
    }
    out
}

/// Second-order width bound
/// `4β²d(3 + log(N X / (16β⁴d²))) + 2d(1 + 2β²d)(1 + X²)` with `X` the
/// largest state norm and `d` the eluder dimension (taken at least 1).
pub fn second_order_bound(beta: f64, eluder_dim: usize, n: usize, sup_state: f64) -> f64 {
    let d = eluder_dim.max(1) as f64;
    let b2 = beta * beta;
    let log_arg = n as f64 * sup_state / (16.0 * b2 * b2 * d * d);
    4.0 * b2 * d * (3.0 + log_arg.max(f64::MIN_POSITIVE).ln())
        + 2.0 * d * (1.0 + 2.0 * b2 * d) * (1.0 + sup_state * sup_state)
}

/// First-order width bound `4β√(N d) + d X`.
pub fn first_order_bound(beta: f64, eluder_dim: usize, n: usize, sup_state: f64) -> f64 {
    let d = eluder_dim.max(1) as f64;
    4.0 * beta * (n as f64 * d).sqrt() + d * sup_state
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LinearFamily;

    #[test]
    fn truth_has_zero_error() {
        let f = DriftFamily::Linear(LinearFamily {
            state_dim: 1,
            action_dim: 1,
        });
        let mut design = DesignLog::new(1, 1);
        design.push(&[1.0], &[0.5], &[0.9]);
        design.push(&[0.9], &[-0.5], &[0.7]);
        let star = vec![-1.0, 1.0];
        let e = prediction_errors(&f, 0.1, &design, &[star.clone(), star.clone()], &star);
        assert_eq!((e.first_order, e.second_order), (0.0, 0.0));
        let e = prediction_errors(&f, 0.1, &design, &[vec![-1.5, 1.0], star.clone()], &star);
        assert!((e.first_order - 0.05).abs() < 1e-15 && (e.second_order - 0.0025).abs() < 1e-15);
    }
}
