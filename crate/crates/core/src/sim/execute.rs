use super::{Corridor, Obstacle, Scenario, SimConfig, SimError};
use crate::geometry::{Trajectory, DT, RATE_HZ};

/// Raw measurements of one trajectory replayed in a scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOutcome {
    pub collided: bool,
    /// Time of the first overlapping sample, seconds.
    pub collision_time: Option<f64>,
    /// Smallest constant-velocity time to collision over all samples;
    /// infinite when no conflict is ever predicted.
    pub min_ttc: f64,
    /// Fraction of samples farther than the half-width from the centerline.
    pub offroad_fraction: f64,
    /// Arc-length progress along the centerline, meters.
    pub progress: f64,
    /// `progress` over the scenario's reference progress, clipped to [0, 1].
    pub progress_ratio: f64,
    pub max_accel: f64,
    pub max_jerk: f64,
}

impl SimOutcome {
    pub fn is_comfortable(&self, cfg: &SimConfig) -> bool {
        self.max_accel <= cfg.max_accel && self.max_jerk <= cfg.max_jerk
    }

    /// No collision, no TTC conflict, fully on-road and comfortable.
    pub fn is_safe(&self, cfg: &SimConfig) -> bool {
        !self.collided && self.min_ttc >= cfg.ttc_threshold && self.offroad_fraction == 0.0 && self.is_comfortable(cfg)
    }
}

/// Replays the first `horizon × 10` waypoints of `traj` against `sc`.
pub fn execute(sc: &Scenario, traj: &Trajectory, cfg: &SimConfig) -> Result<SimOutcome, SimError> {
    measure(&sc.corridor, &sc.obstacles, sc.horizon, sc.reference_progress, traj, cfg)
}

pub(crate) fn measure(
    corridor: &Corridor,
    obstacles: &[Obstacle],
    horizon: f64,
    reference_progress: f64,
    traj: &Trajectory,
    cfg: &SimConfig,
) -> Result<SimOutcome, SimError> {
    let n = (horizon * RATE_HZ).round() as usize;
    if traj.len() < n || traj.rate_hz != RATE_HZ || n == 0 {
        return Err(SimError::ShortTrajectory { needed: n, got: traj.len(), rate: traj.rate_hz });
    }
    let p: Vec<[f64; 2]> = traj.waypoints[..n].iter().map(|w| [w.x, w.y]).collect();

    let mut collision_time = None;
    let mut min_ttc = f64::INFINITY;
    for (k, pk) in p.iter().enumerate() {
        let t = k as f64 * DT;
        let vel = if k + 1 < n {
            [(p[k + 1][0] - pk[0]) / DT, (p[k + 1][1] - pk[1]) / DT]
        } else if k > 0 {
            [(pk[0] - p[k - 1][0]) / DT, (pk[1] - p[k - 1][1]) / DT]
        } else {
            [0.0, 0.0]
        };
        for ob in obstacles {
            let (ox, oy) = ob.position_at(t);
            let reach = cfg.ego_radius + ob.radius;
            let d = [ox - pk[0], oy - pk[1]];
            if d[0].hypot(d[1]) < reach && collision_time.is_none() {
                collision_time = Some(t);
            }
            min_ttc = min_ttc.min(time_to_contact(d, [ob.vx - vel[0], ob.vy - vel[1]], reach));
        }
    }

    let offroad = p.iter().filter(|q| corridor.project(q[0], q[1]).1 > corridor.half_width).count();
    let progress = corridor.project(p[n - 1][0], p[n - 1][1]).0 - corridor.project(p[0][0], p[0][1]).0;
    let progress_ratio = if reference_progress > 0.0 { (progress / reference_progress).clamp(0.0, 1.0) } else { 1.0 };

    let (max_accel, max_jerk) = finite_difference_extremes(&p, cfg.diff_stride.max(1));

    Ok(SimOutcome {
        collided: collision_time.is_some(),
        collision_time,
        min_ttc,
        offroad_fraction: offroad as f64 / n as f64,
        progress,
        progress_ratio,
        max_accel,
        max_jerk,
    })
}

/// Smallest τ ≥ 0 with |d + τw| = reach, infinity if never; zero if
/// already within reach.
fn time_to_contact(d: [f64; 2], w: [f64; 2], reach: f64) -> f64 {
    let c = d[0] * d[0] + d[1] * d[1] - reach * reach;
    if c <= 0.0 {
        return 0.0;
    }
    let a = w[0] * w[0] + w[1] * w[1];
    let b = 2.0 * (d[0] * w[0] + d[1] * w[1]);
    if a < 1e-12 || b >= 0.0 {
        return f64::INFINITY;
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return f64::INFINITY;
    }
    (-b - disc.sqrt()) / (2.0 * a)
}

/// Largest acceleration and jerk magnitudes from central stencils with
/// sample stride `h`.
fn finite_difference_extremes(p: &[[f64; 2]], h: usize) -> (f64, f64) {
    let n = p.len();
    let step = h as f64 * DT;
    let mut max_a: f64 = 0.0;
    let mut max_j: f64 = 0.0;
    for k in h..n.saturating_sub(h) {
        let ax = p[k + h][0] - 2.0 * p[k][0] + p[k - h][0];
        let ay = p[k + h][1] - 2.0 * p[k][1] + p[k - h][1];
        max_a = max_a.max(ax.hypot(ay) / (step * step));
        if k + 2 * h < n {
            let jx = p[k + 2 * h][0] - 3.0 * p[k + h][0] + 3.0 * p[k][0] - p[k - h][0];
            let jy = p[k + 2 * h][1] - 3.0 * p[k + h][1] + 3.0 * p[k][1] - p[k - h][1];
            max_j = max_j.max(jx.hypot(jy) / (step * step * step));
        }
    }
    (max_a, max_j)
}
