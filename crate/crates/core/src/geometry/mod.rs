//! Rigid transforms, the pinhole camera model, depth images and small
//! point-set helpers shared by the rest of the crate.

mod camera;
mod depth;
mod se3;

pub use camera::CameraIntrinsics;
pub use depth::{median_in_place, DepthMap};
pub use se3::{
    nearest_rotation, rotation_angle, rotation_row_major, skew, so3_exp, so3_log, SE3Pose,
};

use thiserror::Error;

pub type Vec3 = nalgebra::Vector3<f64>;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("point is behind camera (z = {z})")]
    BehindCamera { z: f64 },
    #[error("depth must be positive, got {0}")]
    NonPositiveDepth(f64),
    #[error("invalid camera intrinsics {0:?}")]
    InvalidIntrinsics(CameraIntrinsics),
    #[error("depth map has {got} values, expected {expected}")]
    DepthSize { expected: usize, got: usize },
    #[error("invalid depth value {0}")]
    InvalidDepthValue(f64),
}

pub fn centroid(points: &[Vec3]) -> Vec3 {
    if points.is_empty() {
        return Vec3::zeros();
    }
    points.iter().sum::<Vec3>() / points.len() as f64
}

pub fn all_finite(p: &Vec3) -> bool {
    p.iter().all(|c| c.is_finite())
}

/// Linear interpolation `a + s (b - a)`.
pub fn lerp(a: &Vec3, b: &Vec3, s: f64) -> Vec3 {
    a + (b - a) * s
}
