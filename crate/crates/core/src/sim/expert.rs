use super::execute::measure;
use super::{Corridor, Obstacle, SimConfig};
use crate::geometry::{Trajectory, Waypoint, DT, RATE_HZ};

const SUBSTEPS: usize = 10;

/// Brake at `a1` until `t1`, then accelerate at `a2` back toward `v_cap`.
/// Speed never drops below zero nor rises above `v_cap`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedProfile {
    pub v0: f64,
    pub a1: f64,
    pub t1: f64,
    pub a2: f64,
    pub v_cap: f64,
}

impl SpeedProfile {
    pub fn constant(v: f64) -> Self {
        SpeedProfile { v0: v, a1: 0.0, t1: 0.0, a2: 0.0, v_cap: v }
    }

    /// Arc length travelled at each of `n` samples, starting at 0.
    pub fn arc_lengths(&self, n: usize) -> Vec<f64> {
        let h = DT / SUBSTEPS as f64;
        let mut out = Vec::with_capacity(n);
        let (mut s, mut v) = (0.0, self.v0);
        for k in 0..n {
            out.push(s);
            for j in 0..SUBSTEPS {
                let t = k as f64 * DT + j as f64 * h;
                let a = if t < self.t1 { self.a1 } else { self.a2 };
                if a == 0.0 {
                    s += v * h;
                    continue;
                }
                let v_next = (v + a * h).clamp(0.0, self.v_cap.max(self.v0));
                s += 0.5 * (v + v_next) * h;
                v = v_next;
            }
        }
        out
    }
}

/// Poses on the centerline at arc lengths `s0 + s_k`, shifted sideways by
/// `lateral` meters (positive is left).
pub fn follow_centerline(corridor: &Corridor, s0: f64, arc: &[f64], lateral: f64) -> Trajectory {
    Trajectory::new(
        arc.iter()
            .map(|s| corridor.pose_at(s0 + s).compose(&Waypoint { x: 0.0, y: lateral, yaw: 0.0 }))
            .collect(),
    )
}

/// Searches braking/resume speed profiles along the centerline and returns
/// the safe one with the most progress, with its trajectory and progress.
pub fn plan_expert(
    corridor: &Corridor,
    s0: f64,
    obstacles: &[Obstacle],
    v0: f64,
    horizon: f64,
    cfg: &SimConfig,
) -> Option<(SpeedProfile, Trajectory, f64)> {
    let n = (horizon * RATE_HZ).round() as usize;
    let mut candidates = vec![SpeedProfile::constant(v0)];
    for i in 1..=8 {
        let a1 = -0.5 * i as f64;
        for j in 1..=(2.0 * horizon) as usize {
            for a2 in [0.0, 1.0, 2.0] {
                candidates.push(SpeedProfile { v0, a1, t1: 0.5 * j as f64, a2, v_cap: v0 });
            }
        }
    }
    let mut best: Option<(SpeedProfile, Trajectory, f64)> = None;
    for prof in candidates {
        let traj = follow_centerline(corridor, s0, &prof.arc_lengths(n), 0.0);
        let out = measure(corridor, obstacles, horizon, 1.0, &traj, cfg).ok()?;
        if !out.is_safe(cfg) {
            continue;
        }
        if best.as_ref().map_or(true, |b| out.progress > b.2 + 1e-12) {
            best = Some((prof, traj, out.progress));
        }
    }
    best
}
