use nalgebra::{Matrix2, Matrix3, Vector2};
use serde::{Deserialize, Serialize};

use super::RigidError;
use crate::geometry::{centroid, SE3Pose, Vec3};

pub const DEFAULT_MAX_GRIPPER_WIDTH: f64 = 0.08;
const CLEARANCE: f64 = 0.01;
const TOP_FRACTION: f64 = 0.2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraspProposal {
    /// End-effector pose at the first frame, in the frame of the input points.
    pub grasp_pose: SE3Pose,
    pub width: f64,
    pub quality: f64,
}

/// How the gripper frame is oriented relative to the vertical (+z up).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Approach {
    /// Gripper +z points down: the tool approaches along its own +z axis.
    #[default]
    TopDown,
    /// Gripper +z points up: the tool approaches along its own −z axis.
    AlongMinusZ,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GraspSet {
    pub proposals: Vec<GraspProposal>,
    /// Set when every candidate closing axis was wider than the gripper.
    pub too_wide: bool,
}

/// Deterministic parallel-jaw grasp heuristic for points expressed with +z up.
///
/// The tool centre sits at the centroid of the highest 20% of points; the
/// fingers close along a principal axis of the horizontal spread, the minor
/// axis first. Proposals wider than `max_width` are discarded.
pub fn propose_grasp(
    points: &[Vec3],
    approach: Approach,
    max_width: f64,
) -> Result<GraspSet, RigidError> {
    if points.len() < 10 {
        return Err(RigidError::TooFewPoints(points.len()));
    }
    let mut by_height: Vec<&Vec3> = points.iter().collect();
    by_height.sort_by(|a, b| b.z.total_cmp(&a.z));
    let n_top = ((points.len() as f64 * TOP_FRACTION).ceil() as usize).max(1);
    let top: Vec<Vec3> = by_height[..n_top].iter().map(|p| **p).collect();
    let center = centroid(&top);

    let c = centroid(points);
    let mut cov = Matrix2::zeros();
    for p in points {
        let d = Vector2::new(p.x - c.x, p.y - c.y);
        cov += d * d.transpose();
    }
    let eig = cov.symmetric_eigen();
    let (minor, major) = if eig.eigenvalues[0] <= eig.eigenvalues[1] {
        (0, 1)
    } else {
        (1, 0)
    };

    let mut proposals = Vec::new();
    for idx in [minor, major] {
        let axis2 = eig.eigenvectors.column(idx);
        let closing = Vec3::new(axis2[0], axis2[1], 0.0).normalize();
        let (lo, hi) = points
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                let s = p.dot(&closing);
                (lo.min(s), hi.max(s))
            });
        let width = (hi - lo) + CLEARANCE;
        if width > max_width {
            continue;
        }
        let quality = (1.0 - width / max_width).clamp(0.0, 1.0);
        let rotation = match approach {
            Approach::TopDown => {
                let z = Vec3::new(0.0, 0.0, -1.0);
                let x = closing.cross(&z);
                Matrix3::from_columns(&[x, closing, z])
            }
            Approach::AlongMinusZ => {
                let z = Vec3::new(0.0, 0.0, 1.0);
                let x = closing.cross(&z);
                Matrix3::from_columns(&[x, closing, z])
            }
        };
        proposals.push(GraspProposal {
            grasp_pose: SE3Pose::new(rotation, center),
            width,
            quality,
        });
    }
    proposals.sort_by(|a, b| b.quality.total_cmp(&a.quality));
    let too_wide = proposals.is_empty();
    if too_wide {
        log::warn!("no grasp fits within {max_width} m");
    }
    Ok(GraspSet {
        proposals,
        too_wide,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Points on the surface of an axis-aligned box, on a regular lattice.
    fn box_points(size: Vec3, step: f64) -> Vec<Vec3> {
        let mut pts = Vec::new();
        let n = |l: f64| (l / step).round() as usize;
        let (nx, ny, nz) = (n(size.x), n(size.y), n(size.z));
        for i in 0..=nx {
            for j in 0..=ny {
                for k in 0..=nz {
                    let on_surface = i == 0 || j == 0 || k == 0 || i == nx || j == ny || k == nz;
                    if on_surface {
                        pts.push(Vec3::new(
                            i as f64 * size.x / nx as f64 - size.x / 2.0,
                            j as f64 * size.y / ny as f64 - size.y / 2.0,
                            k as f64 * size.z / nz as f64,
                        ));
                    }
                }
            }
        }
        pts
    }

    #[test]
    fn box_closes_along_short_side() {
        let pts = box_points(Vec3::new(0.04, 0.02, 0.02), 0.002);
        // oracle: PCA of the symmetric lattice has axes x (long) and y (short)
        let set = propose_grasp(&pts, Approach::TopDown, DEFAULT_MAX_GRIPPER_WIDTH).unwrap();
        let best = set.proposals[0];
        let closing = best.grasp_pose.rotation.column(1).into_owned();
        assert!(closing.y.abs() > 1.0 - 1e-9, "{closing:?}");
        assert!((best.width - 0.03).abs() < 1e-9);
        assert!(best.grasp_pose.is_valid(1e-12));
        // approach axis points down; tool centre on the upper part
        assert!((best.grasp_pose.rotation.column(2).z + 1.0).abs() < 1e-12);
        assert!(best.grasp_pose.translation.z > 0.015);
        assert_eq!(set.proposals.len(), 2);
        assert!(set.proposals[0].quality >= set.proposals[1].quality);
    }

    #[test]
    fn sphere_width_is_diameter_plus_clearance() {
        let mut pts = Vec::new();
        let r = 0.025;
        for i in 0..40 {
            for j in 0..20 {
                let th = std::f64::consts::TAU * i as f64 / 40.0;
                let ph = std::f64::consts::PI * (j as f64 + 0.5) / 20.0;
                pts.push(Vec3::new(
                    r * ph.sin() * th.cos(),
                    r * ph.sin() * th.sin(),
                    r * ph.cos(),
                ));
            }
        }
        let set = propose_grasp(&pts, Approach::AlongMinusZ, DEFAULT_MAX_GRIPPER_WIDTH).unwrap();
        assert!((set.proposals[0].width - 0.06).abs() < 1e-3);
        assert!((set.proposals[0].grasp_pose.rotation.column(2).z - 1.0).abs() < 1e-12);
    }

    #[test]
    fn too_few_points() {
        let err = propose_grasp(&[Vec3::zeros(); 5], Approach::TopDown, 0.08).unwrap_err();
        assert!(err.to_string().contains("too few points"));
    }

    #[test]
    fn oversized_object_gives_empty_set() {
        let pts = box_points(Vec3::new(0.3, 0.2, 0.05), 0.01);
        let set = propose_grasp(&pts, Approach::TopDown, DEFAULT_MAX_GRIPPER_WIDTH).unwrap();
        assert!(set.too_wide && set.proposals.is_empty());
    }
}
