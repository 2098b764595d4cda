//! Experiment orchestration: regret accounting, frequency studies, sweeps
//! and figures.

mod plots;
mod regret;
mod studies;
mod sweep;

pub use plots::{emit_plots, plot_specs, render_svg, PlotKind, PlotSpec, Series};
pub use regret::{
    compute_regret, coverage_along, decompose_regret, event_flags, learning_trace,
    reference_solution, Decomposition, EventFlags, RegretReport,
};
pub use studies::{
    clock_study, coverage_study, gap_study, read_gap_csv, state_bound_study, write_gap_csv,
    CoverageStudy, FrequencyCheck, GapRow,
};
pub use sweep::{
    default_radius, oracle_model, planner_grid, read_rows, summarize, sweep, write_rows,
    write_sweep, ExperimentConfig, ReferenceConfig, RunRow, SummaryRow, SweepConfig, SweepContext,
    SweepResult,
};
