use super::FamilyMeta;

/// Upper bound on the log covering number of `{μ̄_θ : θ ∈ Θ}` restricted to
/// the state ball of radius `state_radius`, at sup-norm tolerance `tol`.
///
/// Box-cover argument: `θ ↦ μ̄_θ` is `L`-Lipschitz from `‖·‖_∞` into the sup
/// norm on the ball, so ℓ∞ cells of half-width `tol/L` give a cover with at
/// most `1 + 2 L diam / tol` cells per axis.
pub fn log_cover_bound(meta: &FamilyMeta, state_radius: f64, tol: f64) -> f64 {
    assert!(tol > 0.0, "cover tolerance must be positive");
    let l = meta.family.parameter_lipschitz(
        &meta.theta_bounds,
        &meta.action_box,
        state_radius.max(0.0),
    );
    let diam = meta.theta_bounds.diameter();
    if tol >= diam * l {
        return 0.0;
    }
    meta.theta_bounds.dim() as f64 * (1.0 + 2.0 * l * diam / tol).ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelSpec;

    #[test]
    fn halving_tolerance_costs_at_most_log2_per_axis() {
        let meta = ModelSpec::benchmark_linear_1d(0.1).meta();
        for &tol in &[1e-4, 1e-2, 1.0] {
            let a = log_cover_bound(&meta, 5.0, tol);
            let b = log_cover_bound(&meta, 5.0, tol / 2.0);
            assert!(b >= a);
            assert!(b - a <= 2.0 * 2f64.ln() + 1e-12);
        }
    }

    #[test]
    fn huge_tolerance_needs_one_element() {
        let meta = ModelSpec::benchmark_linear_1d(0.1).meta();
        assert_eq!(log_cover_bound(&meta, 1.0, 1e6), 0.0);
    }
}
