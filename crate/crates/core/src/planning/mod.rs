//! Ergodic control on a grid: the diffusive HJB used for planning, the
//! jump HJB used as ground truth, greedy policies and gain evaluation.

mod diffusive;
mod grid;
mod jump;
mod policy;
mod quadrature;
mod solution;

pub use diffusive::{birth_death_evaluate, relative_value_iteration, solve_diffusive};
pub use grid::{Grid, GridConfig};
pub use jump::{evaluate_policy_jump, solve_jump, JumpOperator, HERMITE_ORDER};
pub use policy::{
    evaluate_gain, policy_suboptimality, policy_suboptimality_mc, GainEstimate, GreedyPolicy,
    Suboptimality,
};
pub use quadrature::{gauss_hermite, gauss_hermite_tensor};
pub use solution::{HjbSolution, SolutionSidecar, SolverKind, SolverOptions};
