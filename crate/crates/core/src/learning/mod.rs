//! Least-squares learning of the drift: fit, confidence radius, state bound,
//! eluder diagnostics and prediction-error sums.

mod bounds;
mod confidence;
mod design;
mod eluder;
mod nlls;
mod prediction;

pub use bounds::{beta_n, clock_envelope, RadiusSchedule, StateBound};
pub use confidence::{design_discrepancy_sq, write_learning_csv, ConfidenceState, LearningRow};
pub use design::{quad_form, DesignLog, LinearStats};
pub use eluder::{
    drift_class, estimate_eluder, estimate_eluder_with_limit, EluderReport, FiniteClass,
    EXHAUSTIVE_POINT_LIMIT,
};
pub use nlls::{
    box_least_squares, fit_linear, fit_nlls, fit_objective, FitOptions, FitResult, Objective,
};
pub use prediction::{first_order_bound, prediction_errors, second_order_bound, PredictionErrors};
