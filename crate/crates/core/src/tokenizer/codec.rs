use super::{Codebook, TokenSequence, TokenizerError};
use crate::geometry::{segment, Trajectory, Waypoint};

/// Greedy sequential encoding starting from the trajectory's first waypoint.
pub fn encode(traj: &Trajectory, cb: &Codebook) -> Result<TokenSequence, TokenizerError> {
    let start = *traj.waypoints.first().ok_or(TokenizerError::EmptyTrajectory)?;
    encode_from(traj, cb, start)
}

/// Each ground-truth segment is expressed in the frame of the running decoded
/// pose and matched to its nearest prototype. The pose then advances along
/// that prototype, so errors are corrected rather than accumulated.
pub fn encode_from(
    traj: &Trajectory,
    cb: &Codebook,
    start: Waypoint,
) -> Result<TokenSequence, TokenizerError> {
    if traj.is_empty() {
        return Err(TokenizerError::EmptyTrajectory);
    }
    let mut pose = start;
    let mut ids = Vec::with_capacity(traj.len() / 5);
    for seg in segment(traj)? {
        let (id, _) = cb.nearest(&seg.relative_to(&pose));
        pose = pose.compose(&cb.prototypes()[id].exit_pose());
        ids.push(id);
    }
    Ok(TokenSequence::new(ids))
}

/// Chains prototypes head to tail from `start`.
pub fn decode(ids: &TokenSequence, cb: &Codebook, start: Waypoint) -> Result<Trajectory, TokenizerError> {
    ids.validate(cb.len())?;
    let mut pose = start;
    let mut out = Vec::with_capacity(ids.len() * 5);
    for &id in ids.iter() {
        let proto = &cb.prototypes()[id];
        out.extend(proto.placed_at(&pose).waypoints);
        pose = pose.compose(&proto.exit_pose());
    }
    Ok(Trajectory::new(out))
}

/// Distance between the last ground-truth waypoint and the last waypoint of
/// its encode/decode reconstruction.
pub fn endpoint_error(traj: &Trajectory, cb: &Codebook) -> Result<f64, TokenizerError> {
    let ids = encode(traj, cb)?;
    let rec = decode(&ids, cb, traj.waypoints[0])?;
    let (a, b) = (traj.last().expect("non-empty"), rec.last().expect("non-empty"));
    Ok(a.distance(b))
}
