//! The optimistic learning loop: least-squares confidence sets, lazy
//! episode switches and planning at the most optimistic plausible model.

mod cache;
mod config;
mod optimism;
mod run;
mod trigger;

pub use cache::PlannerCache;
pub use config::AgentConfig;
pub use optimism::{select_optimistic, Selection};
pub use run::{
    replay_mismatches, run, write_episodes_csv, write_telemetry_csv, AgentRun, EpisodeRecord,
    EventTelemetry, RunStatus,
};
pub use trigger::LazyTrigger;
