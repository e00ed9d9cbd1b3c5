use std::f64::consts::PI;

use crate::sim::Scenario;

pub const FEATURE_DIM: usize = 8;

/// Arc-length offsets ahead of the ego at which curvature is sampled.
const CURVATURE_TAPS: [f64; 3] = [5.0, 15.0, 30.0];
const CURVATURE_SCALE: f64 = 20.0;
const OBSTACLE_RANGE: f64 = 50.0;

/// Conditioning vector, layout:
///
/// | idx | value                                   |
/// |-----|-----------------------------------------|
/// | 0   | speed / 10                              |
/// | 1   | acceleration / 3                        |
/// | 2-4 | centerline curvature 5, 15, 30 m ahead × 20 |
/// | 5   | nearest obstacle distance / 50, capped at 1 |
/// | 6   | bearing of that obstacle / π (0 if none) |
/// | 7   | command: +1 left, −1 right, 0 straight  |
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioFeatures(pub Vec<f64>);

impl ScenarioFeatures {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

pub fn features(sc: &Scenario) -> ScenarioFeatures {
    let s0 = sc.ego_arc();
    let mut f = vec![0.0; FEATURE_DIM];
    f[0] = sc.ego.speed / 10.0;
    f[1] = sc.ego.accel / 3.0;
    for (slot, tap) in f[2..5].iter_mut().zip(CURVATURE_TAPS) {
        *slot = sc.corridor.curvature_at(s0 + tap) * CURVATURE_SCALE;
    }
    let ego = sc.ego.pose;
    let nearest = sc
        .obstacles
        .iter()
        .map(|o| {
            let rel = ego.relative(&crate::geometry::Waypoint { x: o.x, y: o.y, yaw: 0.0 });
            (rel.x.hypot(rel.y), rel.y.atan2(rel.x))
        })
        .min_by(|a, b| a.0.total_cmp(&b.0));
    match nearest {
        Some((d, bearing)) => {
            f[5] = d.min(OBSTACLE_RANGE) / OBSTACLE_RANGE;
            f[6] = bearing / PI;
        }
        None => f[5] = 1.0,
    }
    f[7] = sc.command.signed();
    ScenarioFeatures(f)
}
