use nalgebra::{Quaternion, UnitQuaternion};

use super::{frame_id, SegmentLabel, TrajectoryError, TrajectoryPlan};
use crate::scene::CameraPose;

/// Spherical linear interpolation taking the shorter arc.
pub fn slerp(a: &UnitQuaternion<f64>, b: &UnitQuaternion<f64>, t: f64) -> UnitQuaternion<f64> {
    let qa = a.quaternion().coords;
    let mut qb = b.quaternion().coords;
    let mut dot = qa.dot(&qb);
    if dot < 0.0 {
        qb = -qb;
        dot = -dot;
    }
    let coords = if dot > 1.0 - 1e-12 {
        qa * (1.0 - t) + qb * t
    } else {
        let theta = dot.min(1.0).acos();
        let s = theta.sin();
        qa * (((1.0 - t) * theta).sin() / s) + qb * ((t * theta).sin() / s)
    };
    UnitQuaternion::new_normalize(Quaternion::from(coords))
}

/// Slerp on rotation, lerp on translation, intrinsics from `a`.
/// `t = 0` and `t = 1` return `a` and `b` exactly.
pub fn interpolate_pose(a: &CameraPose, b: &CameraPose, t: f64) -> Result<CameraPose, TrajectoryError> {
    if !(0.0..=1.0).contains(&t) {
        return Err(TrajectoryError::InvalidArgument(format!("t = {t} outside [0, 1]")));
    }
    if t == 0.0 {
        return Ok(a.clone());
    }
    if t == 1.0 {
        return Ok(b.clone());
    }
    Ok(CameraPose {
        pose_id: format!("{}~{}@{t}", a.pose_id, b.pose_id),
        rotation: slerp(&a.rotation, &b.rotation, t),
        translation: a.translation * (1.0 - t) + b.translation * t,
        intrinsics: a.intrinsics,
    })
}

/// `n` poses at `t = k / (n - 1)`; references at both ends.
pub fn sample_interpolation(a: &CameraPose, b: &CameraPose, n: usize) -> Result<TrajectoryPlan, TrajectoryError> {
    if n < 2 {
        return Err(TrajectoryError::InvalidArgument("interpolation needs n >= 2".into()));
    }
    let mut poses = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for k in 0..n {
        let end = k == 0 || k == n - 1;
        let t = k as f64 / (n - 1) as f64;
        let mut p = interpolate_pose(a, b, t)?;
        if !end {
            p.pose_id = frame_id(a, b, k);
        }
        poses.push(p);
        labels.push(if end { SegmentLabel::Reference } else { SegmentLabel::Interp });
    }
    Ok(TrajectoryPlan {
        poses,
        labels,
        source_refs: Some((a.pose_id.clone(), b.pose_id.clone())),
        fallback: false,
        warnings: Vec::new(),
    })
}
