use serde::{Deserialize, Serialize};

use crate::geometry::Waypoint;

/// Spacing of the sampled centerline polyline, meters.
const SAMPLE_SPACING: f64 = 0.5;

/// A constant-curvature stretch of centerline. Positive curvature turns left.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorridorPiece {
    pub length: f64,
    pub curvature: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CorridorSpec {
    start: Waypoint,
    pieces: Vec<CorridorPiece>,
    half_width: f64,
}

/// Drivable corridor: a piecewise-constant-curvature centerline and a
/// half-width. The centerline is also kept as a densely sampled polyline for
/// projection queries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "CorridorSpec", into = "CorridorSpec")]
pub struct Corridor {
    pub start: Waypoint,
    pub pieces: Vec<CorridorPiece>,
    pub half_width: f64,
    points: Vec<[f64; 2]>,
    arc: Vec<f64>,
}

impl From<CorridorSpec> for Corridor {
    fn from(s: CorridorSpec) -> Self {
        Corridor::new(s.start, s.pieces, s.half_width)
    }
}

impl From<Corridor> for CorridorSpec {
    fn from(c: Corridor) -> Self {
        CorridorSpec { start: c.start, pieces: c.pieces, half_width: c.half_width }
    }
}

fn advance(p: &Waypoint, length: f64, curvature: f64) -> Waypoint {
    let step = if curvature.abs() < 1e-12 {
        Waypoint { x: length, y: 0.0, yaw: 0.0 }
    } else {
        let th = length * curvature;
        Waypoint::new(th.sin() / curvature, (1.0 - th.cos()) / curvature, th)
    };
    p.compose(&step)
}

impl Corridor {
    pub fn new(start: Waypoint, pieces: Vec<CorridorPiece>, half_width: f64) -> Self {
        let mut c = Corridor { start, pieces, half_width, points: Vec::new(), arc: Vec::new() };
        let total = c.length();
        let n = (total / SAMPLE_SPACING).floor() as usize;
        for i in 0..=n {
            let s = i as f64 * SAMPLE_SPACING;
            let p = c.pose_at(s);
            c.points.push([p.x, p.y]);
            c.arc.push(s);
        }
        if total - n as f64 * SAMPLE_SPACING > 1e-9 {
            let p = c.pose_at(total);
            c.points.push([p.x, p.y]);
            c.arc.push(total);
        }
        c
    }

    pub fn length(&self) -> f64 {
        self.pieces.iter().map(|p| p.length).sum()
    }

    /// Centerline pose at arc length `s`; beyond either end the centerline
    /// continues straight.
    pub fn pose_at(&self, s: f64) -> Waypoint {
        if s <= 0.0 {
            return advance(&self.start, s, 0.0);
        }
        let mut pose = self.start;
        let mut rem = s;
        for piece in &self.pieces {
            if rem <= piece.length {
                return advance(&pose, rem, piece.curvature);
            }
            pose = advance(&pose, piece.length, piece.curvature);
            rem -= piece.length;
        }
        advance(&pose, rem, 0.0)
    }

    pub fn curvature_at(&self, s: f64) -> f64 {
        let mut acc = 0.0;
        for piece in &self.pieces {
            acc += piece.length;
            if s < acc {
                return if s < acc - piece.length { 0.0 } else { piece.curvature };
            }
        }
        0.0
    }

    /// Arc length of the closest centerline point and the distance to it.
    pub fn project(&self, x: f64, y: f64) -> (f64, f64) {
        let mut best = (0.0, f64::INFINITY);
        for i in 0..self.points.len().saturating_sub(1) {
            let [ax, ay] = self.points[i];
            let [bx, by] = self.points[i + 1];
            let (dx, dy) = (bx - ax, by - ay);
            let len2 = dx * dx + dy * dy;
            let t = if len2 > 0.0 { (((x - ax) * dx + (y - ay) * dy) / len2).clamp(0.0, 1.0) } else { 0.0 };
            let (px, py) = (ax + t * dx, ay + t * dy);
            let d = (x - px).hypot(y - py);
            if d < best.1 {
                best = (self.arc[i] + t * (self.arc[i + 1] - self.arc[i]), d);
            }
        }
        best
    }

    pub fn is_straight(&self) -> bool {
        self.pieces.iter().all(|p| p.curvature == 0.0)
    }
}
