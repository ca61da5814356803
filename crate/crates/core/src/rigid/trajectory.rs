use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{estimate_rigid_transform, GraspProposal, RigidError};
use crate::flow::ActionableFlow;
use crate::geometry::{rotation_row_major, SE3Pose};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoseFrame {
    #[default]
    Camera,
    World,
}

/// Object motion relative to the first frame: `poses[t]` maps the frame-0
/// configuration onto the frame-t configuration, so `poses[0]` is identity.
#[derive(Clone, Debug, PartialEq)]
pub struct ObjectPoseTrajectory {
    pub poses: Vec<SE3Pose>,
    pub frame: PoseFrame,
}

impl ObjectPoseTrajectory {
    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    /// Re-expresses camera-frame relative motion in the world frame given the
    /// camera's world pose: `A_w = C A_c C⁻¹`.
    pub fn to_world(&self, world_from_camera: &SE3Pose) -> ObjectPoseTrajectory {
        if self.frame == PoseFrame::World {
            return self.clone();
        }
        let inv = world_from_camera.inverse();
        ObjectPoseTrajectory {
            poses: self
                .poses
                .iter()
                .map(|a| world_from_camera.compose(a).compose(&inv))
                .collect(),
            frame: PoseFrame::World,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let rows: Vec<serde_json::Value> = self
            .poses
            .iter()
            .enumerate()
            .map(|(t, p)| {
                serde_json::json!({
                    "t": t,
                    "rotation": rotation_row_major(&p.rotation),
                    "translation": [p.translation.x, p.translation.y, p.translation.z],
                })
            })
            .collect();
        serde_json::Value::Array(rows)
    }

    pub fn from_json(v: &serde_json::Value, frame: PoseFrame) -> Result<Self, RigidError> {
        #[derive(Deserialize)]
        struct Row {
            t: usize,
            #[serde(flatten)]
            pose: SE3Pose,
        }
        let mut rows: Vec<Row> =
            serde_json::from_value(v.clone()).map_err(|e| RigidError::Format(e.to_string()))?;
        rows.sort_by_key(|r| r.t);
        Ok(Self {
            poses: rows.into_iter().map(|r| r.pose).collect(),
            frame,
        })
    }

    /// `t,qw,qx,qy,qz,x,y,z` with nine significant digits.
    pub fn to_csv(&self) -> String {
        pose_list_csv(&self.poses)
    }
}

pub fn pose_list_csv(poses: &[SE3Pose]) -> String {
    let mut out = String::from("t,qw,qx,qy,qz,x,y,z\n");
    for (t, p) in poses.iter().enumerate() {
        let q = p.quaternion_wxyz();
        let tr = p.translation;
        let _ = writeln!(
            out,
            "{t},{:.8e},{:.8e},{:.8e},{:.8e},{:.8e},{:.8e},{:.8e}",
            q[0], q[1], q[2], q[3], tr.x, tr.y, tr.z
        );
    }
    out
}

/// Per-frame Kabsch alignment of every frame onto the first.
pub fn flow_to_pose_trajectory(flow: &ActionableFlow) -> Result<ObjectPoseTrajectory, RigidError> {
    let first = flow.frame(0);
    let mut poses = Vec::with_capacity(flow.frames);
    poses.push(SE3Pose::identity());
    for t in 1..flow.frames {
        let pose =
            estimate_rigid_transform(first, flow.frame(t)).map_err(|e| RigidError::AtFrame {
                frame: t,
                source: Box::new(e),
            })?;
        poses.push(pose);
    }
    // frame 0 goes through the solver too so degenerate input fails even for T = 1
    estimate_rigid_transform(first, first).map_err(|e| RigidError::AtFrame {
        frame: 0,
        source: Box::new(e),
    })?;
    Ok(ObjectPoseTrajectory {
        poses,
        frame: PoseFrame::Camera,
    })
}

/// End-effector targets under a firm grasp: `ee[t] = pose[t] ∘ grasp`.
pub fn compose_ee_trajectory(traj: &ObjectPoseTrajectory, grasp: &GraspProposal) -> Vec<SE3Pose> {
    traj.poses
        .iter()
        .map(|p| p.compose(&grasp.grasp_pose))
        .collect()
}
