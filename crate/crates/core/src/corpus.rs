//! Synthetic driving trajectories for fitting the tokenizer.
//!
//! Each trajectory integrates a unicycle whose acceleration and curvature
//! are redrawn every second, covering cruising, braking to a stop, and
//! curves of the tightness the micro-world produces. Curvature is capped so
//! lateral acceleration stays below 4 m/s².

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::geometry::{segment, Trajectory, TrajectorySegment, Waypoint, DT, RATE_HZ};
use crate::tokenizer::{endpoint_error, Codebook, TokenizerError};

const SUBSTEPS: usize = 10;
const MAX_SPEED: f64 = 14.0;
const MAX_CURVATURE: f64 = 0.08;
const MAX_LATERAL_ACCEL: f64 = 4.0;

/// `n` trajectories of `horizon` seconds, trajectory `i` drawn from stream
/// `i` of a generator seeded with `seed`.
pub fn generate_corpus(n: usize, horizon: f64, seed: u64) -> Vec<Trajectory> {
    let len = (horizon * RATE_HZ).round() as usize;
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            one_trajectory(&mut rng, len)
        })
        .collect()
}

fn one_trajectory(rng: &mut ChaCha8Rng, len: usize) -> Trajectory {
    let mut v = if rng.gen_bool(0.1) { 0.0 } else { rng.gen_range(0.5..MAX_SPEED) };
    let (mut x, mut y, mut yaw) = (0.0, 0.0, 0.0);
    let mut accel = 0.0;
    let mut kappa = 0.0;
    let h = DT / SUBSTEPS as f64;
    let mut out = Vec::with_capacity(len);
    for k in 0..len {
        if k % 10 == 0 {
            accel = match rng.gen_range(0..4) {
                0 => 0.0,
                1 => rng.gen_range(-4.0..-0.5),
                _ => rng.gen_range(-1.0..2.0),
            };
            let k_max = MAX_CURVATURE.min(MAX_LATERAL_ACCEL / (v * v).max(1e-9));
            kappa = if rng.gen_bool(0.4) { 0.0 } else { rng.gen_range(-k_max..k_max) };
        }
        out.push(Waypoint::new(x, y, yaw));
        for _ in 0..SUBSTEPS {
            let v_next = (v + accel * h).clamp(0.0, MAX_SPEED);
            kappa = kappa.clamp(-MAX_LATERAL_ACCEL / (v_next * v_next).max(1e-9), MAX_LATERAL_ACCEL / (v_next * v_next).max(1e-9));
            let ds = 0.5 * (v + v_next) * h;
            let mid = yaw + 0.5 * kappa * ds;
            x += ds * mid.cos();
            y += ds * mid.sin();
            yaw += kappa * ds;
            v = v_next;
        }
    }
    Trajectory::new(out)
}

/// All canonicalized segments of the corpus.
pub fn corpus_segments(trajs: &[Trajectory]) -> Result<Vec<TrajectorySegment>, TokenizerError> {
    let mut out = Vec::new();
    for t in trajs {
        out.extend(segment(t)?.iter().map(TrajectorySegment::canonicalize));
    }
    Ok(out)
}

/// Mean distance between each trajectory's final waypoint and that of its
/// encode/decode reconstruction.
pub fn mean_endpoint_error(trajs: &[Trajectory], cb: &Codebook) -> Result<f64, TokenizerError> {
    let errs = trajs.par_iter().map(|t| endpoint_error(t, cb)).collect::<Result<Vec<_>, _>>()?;
    Ok(errs.iter().sum::<f64>() / errs.len().max(1) as f64)
}
