//! Rigid-object branch: per-frame pose from keypoint flow, grasp proposal,
//! and end-effector targets under a firm grasp.

mod grasp;
mod kabsch;
mod trajectory;

pub use grasp::{propose_grasp, Approach, GraspProposal, GraspSet, DEFAULT_MAX_GRIPPER_WIDTH};
pub use kabsch::{alignment_residual, estimate_rigid_transform};
pub use trajectory::{
    compose_ee_trajectory, flow_to_pose_trajectory, pose_list_csv, ObjectPoseTrajectory, PoseFrame,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum RigidError {
    #[error("underdetermined: need at least 3 point pairs, got {0}")]
    Underdetermined(usize),
    #[error("degenerate configuration: source points are collinear or coincident")]
    Degenerate,
    #[error("point sets differ in length ({source_len} vs {target_len})")]
    LengthMismatch {
        source_len: usize,
        target_len: usize,
    },
    #[error("at frame {frame}: {source}")]
    AtFrame {
        frame: usize,
        #[source]
        source: Box<RigidError>,
    },
    #[error("too few points for a grasp: {0} (need 10)")]
    TooFewPoints(usize),
    #[error("bad pose trajectory file: {0}")]
    Format(String),
}
