//! Planar trajectory primitives.
//!
//! A [`Trajectory`] is a sequence of poses sampled at a fixed rate; waypoint
//! `k` sits at time `k / rate` relative to the first waypoint, which is the
//! ego pose the trajectory starts from. Tokenization works on
//! [`TrajectorySegment`]s of five waypoints (half a second at 10 Hz), put into
//! a canonical frame whose first waypoint is the origin with zero heading.

use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Output sample rate of every resampled trajectory.
pub const RATE_HZ: f64 = 10.0;
/// Sample spacing at [`RATE_HZ`].
pub const DT: f64 = 1.0 / RATE_HZ;
/// Waypoints per tokenized segment (0.5 s at 10 Hz).
pub const SEGMENT_LEN: usize = 5;

/// Tolerance used when checking that a segment is canonical.
pub const CANONICAL_TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("trajectory needs at least {needed} waypoints, got {got}")]
    TooFewWaypoints { needed: usize, got: usize },
    #[error("trajectory spans {available:.3} s but {needed:.3} s are required")]
    InsufficientSpan { needed: f64, available: f64 },
    #[error("trajectory length {len} is not a multiple of {SEGMENT_LEN}; resample first")]
    NotSegmentMultiple { len: usize },
    #[error("segment is not canonical (first waypoint {0:?})")]
    NonCanonical(Waypoint),
    #[error("invalid sample rate {0}")]
    InvalidRate(f64),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Wraps an angle into (−π, π].
pub fn wrap_angle(a: f64) -> f64 {
    let r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

/// A planar pose: position in meters, heading in radians.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Waypoint {
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
}

impl From<[f64; 3]> for Waypoint {
    fn from(v: [f64; 3]) -> Self {
        Waypoint { x: v[0], y: v[1], yaw: v[2] }
    }
}

impl From<Waypoint> for [f64; 3] {
    fn from(w: Waypoint) -> Self {
        [w.x, w.y, w.yaw]
    }
}

impl Waypoint {
    pub const ORIGIN: Waypoint = Waypoint { x: 0.0, y: 0.0, yaw: 0.0 };

    pub fn new(x: f64, y: f64, yaw: f64) -> Self {
        Waypoint { x, y, yaw: wrap_angle(yaw) }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.yaw.is_finite()
    }

    /// `self ∘ other`: expresses `other`, given in this pose's frame, in the
    /// parent frame.
    pub fn compose(&self, other: &Waypoint) -> Waypoint {
        let (s, c) = self.yaw.sin_cos();
        Waypoint {
            x: self.x + c * other.x - s * other.y,
            y: self.y + s * other.x + c * other.y,
            yaw: wrap_angle(self.yaw + other.yaw),
        }
    }

    pub fn inverse(&self) -> Waypoint {
        let (s, c) = self.yaw.sin_cos();
        Waypoint {
            x: -(c * self.x + s * self.y),
            y: -(-s * self.x + c * self.y),
            yaw: wrap_angle(-self.yaw),
        }
    }

    /// `other` expressed in this pose's frame.
    pub fn relative(&self, other: &Waypoint) -> Waypoint {
        let (s, c) = self.yaw.sin_cos();
        let dx = other.x - self.x;
        let dy = other.y - self.y;
        Waypoint {
            x: c * dx + s * dy,
            y: -s * dx + c * dy,
            yaw: wrap_angle(other.yaw - self.yaw),
        }
    }

    pub fn distance(&self, other: &Waypoint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Poses sampled at a uniform rate. Waypoint `k` is at `k / rate_hz` seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub waypoints: Vec<Waypoint>,
    pub rate_hz: f64,
}

impl Trajectory {
    /// A 10 Hz trajectory.
    pub fn new(waypoints: Vec<Waypoint>) -> Self {
        Trajectory { waypoints, rate_hz: RATE_HZ }
    }

    pub fn with_rate(waypoints: Vec<Waypoint>, rate_hz: f64) -> Self {
        Trajectory { waypoints, rate_hz }
    }

    pub fn len(&self) -> usize {
        self.waypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waypoints.is_empty()
    }

    /// Seconds between the first and the last waypoint.
    pub fn span(&self) -> f64 {
        if self.waypoints.is_empty() {
            0.0
        } else {
            (self.waypoints.len() - 1) as f64 / self.rate_hz
        }
    }

    pub fn last(&self) -> Option<&Waypoint> {
        self.waypoints.last()
    }

    /// Pose at time `t` by linear interpolation of position and shortest-arc
    /// interpolation of heading. Times past the last waypoint are
    /// extrapolated at the final step's velocity for at most one sample.
    pub fn pose_at(&self, t: f64) -> Option<Waypoint> {
        let n = self.waypoints.len();
        if n == 0 || t < -1e-9 {
            return None;
        }
        if n == 1 {
            return (t.abs() < 1e-9).then(|| self.waypoints[0]);
        }
        let u = t * self.rate_hz;
        let last = (n - 1) as f64;
        if u > last + 1.0 + 1e-9 {
            return None;
        }
        let i = (u.floor() as usize).min(n - 2);
        let frac = u - i as f64;
        Some(lerp_pose(&self.waypoints[i], &self.waypoints[i + 1], frac))
    }

    /// Writes the fixture text form: one `x y yaw` line per waypoint.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for w in &self.waypoints {
            let _ = writeln!(out, "{:.16e} {:.16e} {:.16e}", w.x, w.y, w.yaw);
        }
        out
    }

    /// Parses the fixture text form. Blank lines and `#` comments are
    /// ignored; the result is taken to be sampled at 10 Hz.
    pub fn from_text(text: &str) -> Result<Trajectory, GeometryError> {
        let mut waypoints = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            waypoints.push(parse_waypoint_line(line, lineno + 1)?);
        }
        Ok(Trajectory::new(waypoints))
    }
}

pub(crate) fn parse_waypoint_line(line: &str, lineno: usize) -> Result<Waypoint, GeometryError> {
    let vals: Vec<f64> = line
        .split_whitespace()
        .map(|tok| {
            tok.parse::<f64>().map_err(|e| GeometryError::Parse {
                line: lineno,
                msg: format!("bad number {tok:?}: {e}"),
            })
        })
        .collect::<Result<_, _>>()?;
    if vals.len() != 3 {
        return Err(GeometryError::Parse {
            line: lineno,
            msg: format!("expected 3 values, found {}", vals.len()),
        });
    }
    let w = Waypoint { x: vals[0], y: vals[1], yaw: vals[2] };
    if !w.is_finite() {
        return Err(GeometryError::Parse { line: lineno, msg: "non-finite value".into() });
    }
    Ok(w)
}

fn lerp_pose(a: &Waypoint, b: &Waypoint, frac: f64) -> Waypoint {
    if frac == 0.0 {
        return *a;
    }
    if frac == 1.0 {
        return *b;
    }
    Waypoint {
        x: a.x + frac * (b.x - a.x),
        y: a.y + frac * (b.y - a.y),
        yaw: wrap_angle(a.yaw + frac * wrap_angle(b.yaw - a.yaw)),
    }
}

/// Resamples to 10 Hz over `horizon` seconds, producing `horizon × 10`
/// waypoints starting at the first input waypoint.
pub fn resample_to_10hz(traj: &Trajectory, horizon: f64) -> Result<Trajectory, GeometryError> {
    if !(traj.rate_hz.is_finite() && traj.rate_hz > 0.0) {
        return Err(GeometryError::InvalidRate(traj.rate_hz));
    }
    if traj.len() < 2 {
        return Err(GeometryError::TooFewWaypoints { needed: 2, got: traj.len() });
    }
    let n_out = (horizon * RATE_HZ).round() as usize;
    let needed = n_out.saturating_sub(1) as f64 * DT;
    if traj.span() + 1e-9 < needed {
        return Err(GeometryError::InsufficientSpan { needed, available: traj.span() });
    }
    let n = traj.len();
    let step = traj.rate_hz / RATE_HZ;
    let out = (0..n_out)
        .map(|k| {
            let u = k as f64 * step;
            let i = u.floor() as usize;
            if i >= n - 1 {
                return traj.waypoints[n - 1];
            }
            lerp_pose(&traj.waypoints[i], &traj.waypoints[i + 1], u - i as f64)
        })
        .collect();
    Ok(Trajectory::new(out))
}

/// Five consecutive waypoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySegment {
    pub waypoints: [Waypoint; SEGMENT_LEN],
}

impl TrajectorySegment {
    pub fn new(waypoints: [Waypoint; SEGMENT_LEN]) -> Self {
        TrajectorySegment { waypoints }
    }

    pub fn first(&self) -> &Waypoint {
        &self.waypoints[0]
    }

    /// Rigid transform taking the first waypoint to (0, 0, 0).
    pub fn canonicalize(&self) -> TrajectorySegment {
        self.relative_to(&self.waypoints[0])
    }

    /// Every waypoint expressed in the frame of `pose`.
    pub fn relative_to(&self, pose: &Waypoint) -> TrajectorySegment {
        TrajectorySegment { waypoints: self.waypoints.map(|w| pose.relative(&w)) }
    }

    /// Every waypoint mapped from the frame of `pose` into the parent frame.
    pub fn placed_at(&self, pose: &Waypoint) -> TrajectorySegment {
        TrajectorySegment { waypoints: self.waypoints.map(|w| pose.compose(&w)) }
    }

    pub fn is_canonical(&self) -> bool {
        let f = self.first();
        f.x.abs() <= CANONICAL_TOL && f.y.abs() <= CANONICAL_TOL && f.yaw.abs() <= CANONICAL_TOL
    }

    /// Pose one step past the last waypoint, continuing the final step's
    /// relative motion. Consecutive segments of a trajectory are joined here.
    pub fn exit_pose(&self) -> Waypoint {
        let w = &self.waypoints;
        let step = w[SEGMENT_LEN - 2].relative(&w[SEGMENT_LEN - 1]);
        w[SEGMENT_LEN - 1].compose(&step)
    }
}

/// Splits a trajectory into consecutive 5-waypoint segments.
pub fn segment(traj: &Trajectory) -> Result<Vec<TrajectorySegment>, GeometryError> {
    if traj.is_empty() {
        return Err(GeometryError::TooFewWaypoints { needed: SEGMENT_LEN, got: 0 });
    }
    if traj.len() % SEGMENT_LEN != 0 {
        return Err(GeometryError::NotSegmentMultiple { len: traj.len() });
    }
    Ok(traj
        .waypoints
        .chunks_exact(SEGMENT_LEN)
        .map(|c| TrajectorySegment::new([c[0], c[1], c[2], c[3], c[4]]))
        .collect())
}

/// Joins segments back into a 10 Hz trajectory.
pub fn concat(segments: &[TrajectorySegment]) -> Trajectory {
    Trajectory::new(segments.iter().flat_map(|s| s.waypoints).collect())
}

/// Mean Euclidean distance between index-aligned (x, y) positions. Heading is
/// ignored. No frame check; see [`contour_distance`].
pub fn mean_pointwise_distance(a: &TrajectorySegment, b: &TrajectorySegment) -> f64 {
    let sum: f64 = a
        .waypoints
        .iter()
        .zip(&b.waypoints)
        .map(|(p, q)| (p.x - q.x).hypot(p.y - q.y))
        .sum();
    sum / SEGMENT_LEN as f64
}

/// Contour distance between two canonical segments.
pub fn contour_distance(
    a: &TrajectorySegment,
    b: &TrajectorySegment,
) -> Result<f64, GeometryError> {
    for s in [a, b] {
        if !s.is_canonical() {
            return Err(GeometryError::NonCanonical(*s.first()));
        }
    }
    Ok(mean_pointwise_distance(a, b))
}
