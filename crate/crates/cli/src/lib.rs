//! Scenario harness for the delayed predator-prey laboratory: configuration,
//! the run pipeline, verdicts and the built-in reproduction presets.

pub mod config;
pub mod presets;
pub mod report;
pub mod scenario;

pub use config::{Analyses, InitialKind, InitialSpec, ProfileSpec, ScenarioConfig};
pub use presets::{preset_config, reproduce, run_preset, Figure, Reproduction};
pub use report::{Distances, ScenarioReport, Verdict};
