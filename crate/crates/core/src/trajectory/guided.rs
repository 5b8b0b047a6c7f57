use super::interp::{interpolate_pose, sample_interpolation};
use super::orbit::{wrap_angle, OrbitPath};
use super::{frame_id, SegmentLabel, TrajectoryError, TrajectoryPlan};
use crate::scene::CameraPose;

/// Default `(n₁, n₂, n₃)` split for a 49-frame plan.
pub const DEFAULT_SPLIT_49: (usize, usize, usize) = (8, 33, 8);

/// Split for an `n`-frame plan in the same proportions as [`DEFAULT_SPLIT_49`],
/// with at least one frame per leg. Plans of fewer than 3 frames have no orbit.
pub fn default_split(n: usize) -> (usize, usize, usize) {
    if n == 49 {
        return DEFAULT_SPLIT_49;
    }
    if n < 3 {
        let n1 = n.div_ceil(2).max(1);
        return (n1, 0, n.saturating_sub(n1));
    }
    let leg = ((n as f64 * DEFAULT_SPLIT_49.0 as f64 / 49.0).round() as usize).max(1);
    let leg = leg.min((n - 1) / 2);
    (leg, n - 2 * leg, leg)
}

/// Arcs shorter than this (radians) count as zero-length.
const MIN_ARC: f64 = 1e-9;

/// Reference view → nearest orbit point → along the orbit (shorter way) →
/// nearest orbit point of the second reference → second reference view.
///
/// Segment 1 samples `t = k/n₁, k < n₁` of the first leg, segment 2 spans
/// the arc inclusively, segment 3 samples `t = k/n₃, k ≥ 1` of the last leg,
/// so the plan starts and ends exactly at the references. With `n₂ = 0` the
/// plan is plain interpolation.
pub fn sample_reference_guided(
    ref_a: &CameraPose,
    ref_b: &CameraPose,
    orbit: &OrbitPath,
    n: usize,
    split: (usize, usize, usize),
) -> Result<TrajectoryPlan, TrajectoryError> {
    let (n1, n2, n3) = split;
    if n1 + n2 + n3 != n {
        return Err(TrajectoryError::InvalidArgument(format!(
            "split {split:?} does not sum to {n}"
        )));
    }
    if n1 == 0 || n3 == 0 {
        return Err(TrajectoryError::InvalidArgument("n1 and n3 must be at least 1".into()));
    }
    if n2 == 0 {
        return sample_interpolation(ref_a, ref_b, n);
    }

    let theta_a = orbit.nearest_angle(&ref_a.center());
    let theta_b = orbit.nearest_angle(&ref_b.center());
    let arc = wrap_angle(theta_b - theta_a);
    if arc.abs() < MIN_ARC {
        let mut plan = sample_interpolation(ref_a, ref_b, n)?;
        plan.fallback = true;
        plan.warnings.push(format!(
            "references {} and {} project to the same orbit point; using interpolation",
            ref_a.pose_id, ref_b.pose_id
        ));
        return Ok(plan);
    }

    let mut orbit_a = orbit.pose_at("orbit_a", theta_a)?;
    let mut orbit_b = orbit.pose_at("orbit_b", theta_b)?;
    orbit_a.intrinsics = ref_a.intrinsics;
    orbit_b.intrinsics = ref_a.intrinsics;

    let mut poses = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for k in 0..n1 {
        let p = interpolate_pose(ref_a, &orbit_a, k as f64 / n1 as f64)?;
        poses.push(p);
        labels.push(if k == 0 { SegmentLabel::Reference } else { SegmentLabel::Interp });
    }
    for k in 0..n2 {
        let frac = if n2 == 1 { 0.5 } else { k as f64 / (n2 - 1) as f64 };
        let mut p = orbit.pose_at("", theta_a + arc * frac)?;
        p.intrinsics = ref_a.intrinsics;
        poses.push(p);
        labels.push(SegmentLabel::Orbit);
    }
    for k in 1..=n3 {
        let p = interpolate_pose(&orbit_b, ref_b, k as f64 / n3 as f64)?;
        poses.push(p);
        labels.push(if k == n3 { SegmentLabel::Reference } else { SegmentLabel::Interp });
    }
    for (k, (p, l)) in poses.iter_mut().zip(&labels).enumerate() {
        if *l != SegmentLabel::Reference {
            p.pose_id = frame_id(ref_a, ref_b, k);
        }
    }
    Ok(TrajectoryPlan {
        poses,
        labels,
        source_refs: Some((ref_a.pose_id.clone(), ref_b.pose_id.clone())),
        fallback: false,
        warnings: Vec::new(),
    })
}
