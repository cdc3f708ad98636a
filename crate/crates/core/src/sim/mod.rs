//! Discrete-event simulation of a witnessing zone.

pub mod calibrate;
pub mod events;
pub mod heatmap;
pub mod monte_carlo;
pub mod run;
pub mod scenario;

pub use calibrate::{calibrate, Calibration, CalibrationTarget};
pub use heatmap::{heatmap, GridSpec, HeatmapCell, HeatmapMode};
pub use monte_carlo::{monte_carlo, Summary};
pub use run::{run_scenario, run_with_keys, RunResult};
pub use scenario::{build_scenario, ScenarioConfig, SCENARIO_NAMES};
