//! Seeded 2D driving micro-world.
//!
//! Every scenario lives in the ego frame: the ego starts at the origin facing
//! +x, and the corridor centerline passes through it. [`generate_scenario`]
//! builds one of three strata, [`execute`] replays a planned trajectory
//! against it and reports raw safety and progress measurements.

mod corridor;
mod execute;
mod expert;
mod scenario;

pub use corridor::{Corridor, CorridorPiece};
pub use execute::{execute, SimOutcome};
pub use expert::{follow_centerline, plan_expert, SpeedProfile};
pub use scenario::{
    generate_scenario, generate_scenario_with, load_scenarios, rater_references, save_scenarios,
    Command, Difficulty, EgoState, Obstacle, RaterRef, Scenario, ScenarioStyle, SCENARIO_SCHEMA,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::GeometryError;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("trajectory has {got} waypoints at {rate} Hz but the horizon needs {needed} at 10 Hz")]
    ShortTrajectory { needed: usize, got: usize, rate: f64 },
    #[error("scenario {0} carries no rater references")]
    NoRaters(String),
    #[error("scenario file: {0}")]
    Format(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Physical constants of the simulator. None of them are sacred; the defaults
/// are round numbers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Ego disc radius in meters.
    pub ego_radius: f64,
    /// Time-to-collision below which the TTC sub-score fails, seconds.
    pub ttc_threshold: f64,
    /// Comfort limit on acceleration magnitude, m/s².
    pub max_accel: f64,
    /// Comfort limit on jerk magnitude, m/s³.
    pub max_jerk: f64,
    /// Sample stride of the finite-difference stencils for accel and jerk.
    pub diff_stride: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig { ego_radius: 1.0, ttc_threshold: 1.0, max_accel: 4.0, max_jerk: 8.0, diff_stride: 5 }
    }
}
