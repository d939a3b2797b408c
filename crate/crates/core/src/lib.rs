//! Autonomous-driving scenario simulator with head-up display cue policies,
//! hazard warnings, a skin-conductance processing chain and the statistics
//! used to compare the policies.

pub mod avcontrol;
pub mod config;
pub mod geom;
pub mod hazard;
pub mod hud;
pub mod physio;
pub mod pipeline;
pub mod scenario;
pub mod sim;
pub mod stats;

pub use config::Settings;
pub use pipeline::{PipelineError, RunConfig, ScenarioSource};
