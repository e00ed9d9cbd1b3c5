use std::fmt;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::expert::{follow_centerline, plan_expert};
use super::{execute, Corridor, CorridorPiece, SimConfig, SimError};
use crate::geometry::{Trajectory, Waypoint, RATE_HZ, SEGMENT_LEN};

/// Version tag of the scenario-set file.
pub const SCENARIO_SCHEMA: &str = "scenario-v1";

/// Arc length of the ego on the centerline.
const EGO_ARC: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Difficulty {
    Easy,
    Turn,
    Hard,
}

impl Difficulty {
    pub const ALL: [Difficulty; 3] = [Difficulty::Easy, Difficulty::Turn, Difficulty::Hard];

    fn tag(self) -> u64 {
        self as u64 + 1
    }
}

impl fmt::Display for Difficulty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Difficulty::Easy => "easy",
            Difficulty::Turn => "turn",
            Difficulty::Hard => "hard",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Straight,
    Left,
    Right,
}

impl Command {
    pub fn signed(self) -> f64 {
        match self {
            Command::Straight => 0.0,
            Command::Left => 1.0,
            Command::Right => -1.0,
        }
    }
}

/// Which benchmark a scenario imitates: 4 s horizon scored by the PDM
/// composite, or 5 s horizon scored against rater references.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioStyle {
    Navsim,
    Waymo,
}

impl ScenarioStyle {
    pub fn horizon(self) -> f64 {
        match self {
            ScenarioStyle::Navsim => 4.0,
            ScenarioStyle::Waymo => 5.0,
        }
    }

    pub fn token_count(self) -> usize {
        (self.horizon() * RATE_HZ) as usize / SEGMENT_LEN
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EgoState {
    pub pose: Waypoint,
    pub speed: f64,
    pub accel: f64,
}

/// Disc moving at constant velocity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub x: f64,
    pub y: f64,
    pub radius: f64,
    pub vx: f64,
    pub vy: f64,
}

impl Obstacle {
    pub fn position_at(&self, t: f64) -> (f64, f64) {
        (self.x + self.vx * t, self.y + self.vy * t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RaterRef {
    pub trajectory: Trajectory,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: String,
    pub seed: u64,
    pub difficulty: Difficulty,
    pub style: ScenarioStyle,
    pub corridor: Corridor,
    pub obstacles: Vec<Obstacle>,
    pub ego: EgoState,
    pub command: Command,
    pub horizon: f64,
    /// Centerline progress of the expert plan, meters.
    pub reference_progress: f64,
    pub expert: Trajectory,
    pub rater_refs: Vec<RaterRef>,
}

impl Scenario {
    pub fn token_count(&self) -> usize {
        self.style.token_count()
    }

    /// Ego arc length on the corridor centerline.
    pub fn ego_arc(&self) -> f64 {
        EGO_ARC
    }
}

pub fn generate_scenario(seed: u64, difficulty: Difficulty) -> Scenario {
    generate_scenario_with(seed, difficulty, ScenarioStyle::Navsim, &SimConfig::default())
}

/// Deterministic in all arguments. Parameter draws that admit no safe
/// expert plan are discarded and redrawn from the same stream.
pub fn generate_scenario_with(seed: u64, difficulty: Difficulty, style: ScenarioStyle, cfg: &SimConfig) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(difficulty.tag());
    let horizon = style.horizon();
    let start = Waypoint::new(-EGO_ARC, 0.0, 0.0);
    loop {
        let (corridor, obstacles, speed, command) = match difficulty {
            Difficulty::Easy => {
                let hw = rng.gen_range(6.5..7.5);
                let v = rng.gen_range(3.0..6.0);
                let c = Corridor::new(start, vec![CorridorPiece { length: 120.0, curvature: 0.0 }], hw);
                (c, vec![], v, Command::Straight)
            }
            Difficulty::Turn => {
                let d0 = rng.gen_range(0.0..4.0);
                let r: f64 = rng.gen_range(16.0..30.0);
                let left = rng.gen_bool(0.5);
                let v = rng.gen_range(5.0..(3.0 * r).sqrt().min(8.0));
                let k = if left { 1.0 / r } else { -1.0 / r };
                let pieces = vec![
                    CorridorPiece { length: EGO_ARC + d0, curvature: 0.0 },
                    CorridorPiece { length: r * std::f64::consts::FRAC_PI_2, curvature: k },
                    CorridorPiece { length: 60.0, curvature: 0.0 },
                ];
                let c = Corridor::new(start, pieces, 2.5);
                (c, vec![], v, if left { Command::Left } else { Command::Right })
            }
            Difficulty::Hard => {
                let v = rng.gen_range(6.0..10.0);
                let t_c = rng.gen_range(1.5..3.5);
                let u = rng.gen_range(1.0..2.0);
                let side = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                let ob = Obstacle { x: v * t_c, y: side * u * t_c, radius: 0.8, vx: 0.0, vy: -side * u };
                let c = Corridor::new(start, vec![CorridorPiece { length: 120.0, curvature: 0.0 }], 1.75);
                (c, vec![ob], v, Command::Straight)
            }
        };
        let Some((profile, expert, progress)) = plan_expert(&corridor, EGO_ARC, &obstacles, speed, horizon, cfg) else {
            continue;
        };
        if progress < 0.5 {
            continue;
        }
        let mut sc = Scenario {
            id: format!("{difficulty}-{seed}"),
            seed,
            difficulty,
            style,
            corridor,
            obstacles,
            ego: EgoState { pose: Waypoint::ORIGIN, speed, accel: 0.0 },
            command,
            horizon,
            reference_progress: progress,
            expert,
            rater_refs: Vec::new(),
        };
        if style == ScenarioStyle::Waymo {
            let n = (horizon * RATE_HZ).round() as usize;
            let arc = profile.arc_lengths(n);
            let slow: Vec<f64> = arc.iter().map(|s| 0.7 * s).collect();
            let marginal: Vec<f64> = arc.iter().map(|s| 0.85 * s).collect();
            let offset = 0.6 * sc.corridor.half_width * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            sc.rater_refs = vec![
                RaterRef { trajectory: sc.expert.clone(), score: 10.0 },
                RaterRef { trajectory: follow_centerline(&sc.corridor, EGO_ARC, &slow, 0.0), score: 7.0 },
                RaterRef { trajectory: follow_centerline(&sc.corridor, EGO_ARC, &marginal, offset), score: 4.0 },
            ];
            let top = execute(&sc, &sc.rater_refs[0].trajectory, cfg).expect("reference covers horizon");
            assert!(!top.collided, "top-rated reference collides in {}", sc.id);
        }
        return sc;
    }
}

pub fn rater_references(sc: &Scenario) -> Result<&[RaterRef], SimError> {
    if sc.rater_refs.is_empty() {
        Err(SimError::NoRaters(sc.id.clone()))
    } else {
        Ok(&sc.rater_refs)
    }
}

#[derive(Serialize, Deserialize)]
struct ScenarioFile {
    schema: String,
    scenarios: Vec<Scenario>,
}

pub fn save_scenarios(path: &Path, scenarios: &[Scenario]) -> Result<(), SimError> {
    let file = ScenarioFile { schema: SCENARIO_SCHEMA.into(), scenarios: scenarios.to_vec() };
    std::fs::write(path, serde_json::to_string_pretty(&file)?)?;
    Ok(())
}

pub fn load_scenarios(path: &Path) -> Result<Vec<Scenario>, SimError> {
    let file: ScenarioFile = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    if file.schema != SCENARIO_SCHEMA {
        return Err(SimError::Format(format!("unsupported schema {:?}", file.schema)));
    }
    Ok(file.scenarios)
}
