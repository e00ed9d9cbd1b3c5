use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{TokenizerError, MAX_WIRE_ID};
use crate::geometry::{
    mean_pointwise_distance, parse_waypoint_line, wrap_angle, GeometryError, TrajectorySegment,
    Waypoint, SEGMENT_LEN,
};

/// Canonical trajectory-segment prototypes; token `i` is prototype `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    prototypes: Vec<TrajectorySegment>,
}

/// Result of [`fit_codebook`].
#[derive(Debug, Clone)]
pub struct CodebookFit {
    pub codebook: Codebook,
    /// Total within-cluster contour distance after each assignment pass.
    pub objective: Vec<f64>,
    pub iterations: usize,
    /// Number of empty clusters that were re-seeded.
    pub reseeds: usize,
}

impl Codebook {
    pub fn new(prototypes: Vec<TrajectorySegment>) -> Result<Self, TokenizerError> {
        if prototypes.is_empty() || prototypes.len() > MAX_WIRE_ID + 1 {
            return Err(TokenizerError::BadVocabSize(prototypes.len()));
        }
        if let Some(p) = prototypes.iter().find(|p| !p.is_canonical()) {
            return Err(GeometryError::NonCanonical(*p.first()).into());
        }
        Ok(Codebook { prototypes })
    }

    pub fn len(&self) -> usize {
        self.prototypes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prototypes.is_empty()
    }

    pub fn prototypes(&self) -> &[TrajectorySegment] {
        &self.prototypes
    }

    pub fn prototype(&self, id: usize) -> Result<&TrajectorySegment, TokenizerError> {
        self.prototypes
            .get(id)
            .ok_or(TokenizerError::Vocabulary { id, vocab: self.prototypes.len() })
    }

    /// Nearest prototype by mean pointwise distance; ties go to the lowest id.
    pub fn nearest(&self, seg: &TrajectorySegment) -> (usize, f64) {
        nearest(&self.prototypes, seg)
    }

    /// `kdisc v1 K=<K>` followed by K blocks of five `x y yaw` lines.
    pub fn to_text(&self) -> String {
        let mut out = format!("kdisc v1 K={}\n", self.prototypes.len());
        for p in &self.prototypes {
            for w in &p.waypoints {
                let _ = writeln!(out, "{:.16e} {:.16e} {:.16e}", w.x, w.y, w.yaw);
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, TokenizerError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines
            .next()
            .ok_or_else(|| TokenizerError::Persistence("empty file".into()))?;
        let k: usize = header
            .trim()
            .strip_prefix("kdisc v1 K=")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| TokenizerError::Persistence(format!("bad header {header:?}")))?;
        let mut waypoints = Vec::with_capacity(k * SEGMENT_LEN);
        for (lineno, line) in lines {
            waypoints.push(parse_waypoint_line(line.trim(), lineno + 1)?);
        }
        if waypoints.len() != k * SEGMENT_LEN {
            return Err(TokenizerError::Persistence(format!(
                "expected {} waypoint lines for K={k}, found {}",
                k * SEGMENT_LEN,
                waypoints.len()
            )));
        }
        let prototypes = waypoints
            .chunks_exact(SEGMENT_LEN)
            .map(|c| TrajectorySegment::new([c[0], c[1], c[2], c[3], c[4]]))
            .collect();
        Codebook::new(prototypes)
    }

    pub fn save(&self, path: &Path) -> Result<(), TokenizerError> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, TokenizerError> {
        Codebook::from_text(&std::fs::read_to_string(path)?)
    }
}

fn nearest(centers: &[TrajectorySegment], seg: &TrajectorySegment) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centers.iter().enumerate() {
        let d = mean_pointwise_distance(c, seg);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

fn segment_key(s: &TrajectorySegment) -> [u64; 3 * SEGMENT_LEN] {
    let mut key = [0u64; 3 * SEGMENT_LEN];
    for (i, w) in s.waypoints.iter().enumerate() {
        key[3 * i] = w.x.to_bits();
        key[3 * i + 1] = w.y.to_bits();
        key[3 * i + 2] = w.yaw.to_bits();
    }
    key
}

/// Waypoint-wise mean (circular mean for heading), re-canonicalized.
fn mean_segment<'a>(members: impl Iterator<Item = &'a TrajectorySegment>) -> Option<TrajectorySegment> {
    let mut acc = [[0.0f64; 4]; SEGMENT_LEN];
    let mut n = 0usize;
    for s in members {
        n += 1;
        for (a, w) in acc.iter_mut().zip(&s.waypoints) {
            a[0] += w.x;
            a[1] += w.y;
            a[2] += w.yaw.sin();
            a[3] += w.yaw.cos();
        }
    }
    if n == 0 {
        return None;
    }
    let inv = 1.0 / n as f64;
    let wps = acc.map(|a| Waypoint { x: a[0] * inv, y: a[1] * inv, yaw: wrap_angle(a[2].atan2(a[3])) });
    Some(TrajectorySegment::new(wps).canonicalize())
}

/// Lloyd-style k-means under the contour distance.
///
/// Centers start from a seeded k-means++ draw. Each pass assigns every
/// segment to its nearest center, re-seeds empty clusters from the segment
/// farthest from its center, then moves each center to the waypoint-wise
/// mean of its members. A mean that would raise its cluster's summed
/// distance is rejected, so the recorded objective never increases.
pub fn fit_codebook(
    segments: &[TrajectorySegment],
    k: usize,
    seed: u64,
    max_iters: usize,
) -> Result<CodebookFit, TokenizerError> {
    if k == 0 || k > MAX_WIRE_ID + 1 {
        return Err(TokenizerError::BadVocabSize(k));
    }
    if let Some(s) = segments.iter().find(|s| !s.is_canonical()) {
        return Err(GeometryError::NonCanonical(*s.first()).into());
    }
    let distinct: HashSet<_> = segments.iter().map(segment_key).collect();
    if distinct.len() < k {
        return Err(TokenizerError::InsufficientData { needed: k, got: distinct.len() });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = kmeans_pp_init(segments, k, &mut rng);
    let mut assignment: Vec<usize> = vec![usize::MAX; segments.len()];
    let mut objective = Vec::new();
    let mut reseeds = 0usize;
    let mut iterations = 0usize;

    loop {
        iterations += 1;
        let assigned: Vec<(usize, f64)> = segments.par_iter().map(|s| nearest(&centers, s)).collect();
        let mut changed = false;
        let mut dists: Vec<f64> = Vec::with_capacity(segments.len());
        for (i, (c, d)) in assigned.into_iter().enumerate() {
            changed |= assignment[i] != c;
            assignment[i] = c;
            dists.push(d);
        }

        let mut counts = vec![0usize; k];
        for &c in &assignment {
            counts[c] += 1;
        }
        for empty in 0..k {
            if counts[empty] > 0 {
                continue;
            }
            let far = (0..segments.len())
                .filter(|&i| counts[assignment[i]] > 1)
                .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)))
                .expect("more distinct segments than clusters");
            log::warn!("k-means: cluster {empty} empty, re-seeding from segment {far}");
            counts[assignment[far]] -= 1;
            counts[empty] = 1;
            assignment[far] = empty;
            centers[empty] = segments[far];
            dists[far] = 0.0;
            reseeds += 1;
            changed = true;
        }
        objective.push(dists.iter().sum());

        if !changed && iterations > 1 || iterations >= max_iters {
            break;
        }

        let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
        for (i, &c) in assignment.iter().enumerate() {
            members[c].push(i);
        }
        let updates: Vec<Option<TrajectorySegment>> = members
            .par_iter()
            .enumerate()
            .map(|(c, idx)| {
                let mean = mean_segment(idx.iter().map(|&i| &segments[i]))?;
                let cost_mean: f64 = idx.iter().map(|&i| mean_pointwise_distance(&mean, &segments[i])).sum();
                let cost_old: f64 = idx.iter().map(|&i| dists[i]).sum();
                (cost_mean <= cost_old && mean != centers[c]).then_some(mean)
            })
            .collect();
        let mut moved = false;
        for (c, u) in updates.into_iter().enumerate() {
            if let Some(m) = u {
                centers[c] = m;
                moved = true;
            }
        }
        if !moved && !changed {
            break;
        }
    }

    Ok(CodebookFit { codebook: Codebook::new(centers)?, objective, iterations, reseeds })
}

fn kmeans_pp_init(segments: &[TrajectorySegment], k: usize, rng: &mut ChaCha8Rng) -> Vec<TrajectorySegment> {
    let mut centers = Vec::with_capacity(k);
    centers.push(segments[rng.gen_range(0..segments.len())]);
    let mut d2: Vec<f64> = segments
        .par_iter()
        .map(|s| mean_pointwise_distance(&centers[0], s).powi(2))
        .collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.gen::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = None;
            for (i, &w) in d2.iter().enumerate() {
                acc += w;
                if acc > target && w > 0.0 {
                    chosen = Some(i);
                    break;
                }
            }
            chosen.unwrap_or_else(|| d2.iter().rposition(|&w| w > 0.0).unwrap())
        } else {
            unreachable!("distinct segment count checked before seeding")
        };
        let c = segments[pick];
        centers.push(c);
        d2.par_iter_mut().zip(segments.par_iter()).for_each(|(d, s)| {
            *d = d.min(mean_pointwise_distance(&c, s).powi(2));
        });
    }
    centers
}
