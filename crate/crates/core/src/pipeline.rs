//! End-to-end orchestration shared by the CLI, the examples and the
//! acceptance tests.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::deformable::{build_correspondence, mpc_rollout, DeformableError, DynamicsSpec, MpcConfig, RolloutLog};
use crate::flow::{score_candidates, select_candidate, ActionableFlow, FlowCandidate, FlowError, ScoreConfig};
use crate::geometry::{CameraIntrinsics, SE3Pose};
use crate::kinematics::{solve_ik, IkOptions, JointConfig, KinematicsError, RobotModel};
use crate::rigid::{
    compose_ee_trajectory, flow_to_pose_trajectory, propose_grasp, Approach, GraspProposal, ObjectPoseTrajectory,
    PoseFrame, RigidError, DEFAULT_MAX_GRIPPER_WIDTH,
};
use crate::sim::{corrupt_flow, SimError};
use crate::trajopt::{optimize_trajectory, Obstacle, TrajOptError, TrajOptProblem, TrajOptResult, TrajOptWeights};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("no grasp fits the gripper (object wider than {0} m on every axis)")]
    NoGrasp(f64),
    #[error("IK failed for the {which} end-effector target: {source}")]
    Ik {
        which: &'static str,
        #[source]
        source: KinematicsError,
    },
    #[error("invalid pipeline config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Rigid(#[from] RigidError),
    #[error(transparent)]
    TrajOpt(#[from] TrajOptError),
    #[error(transparent)]
    Deformable(#[from] DeformableError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

fn d_spf() -> usize {
    4
}
fn d_width() -> f64 {
    DEFAULT_MAX_GRIPPER_WIDTH
}
fn d_eps() -> f64 {
    crate::trajopt::DEFAULT_EPS_SAFE
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RigidPlanConfig {
    /// Trajectory steps per flow frame; the optimized trajectory has
    /// `(T − 1)·steps_per_flow_frame + 1` configurations.
    #[serde(default = "d_spf")]
    pub steps_per_flow_frame: usize,
    #[serde(default)]
    pub approach: Approach,
    #[serde(default = "d_width")]
    pub max_gripper_width: f64,
    #[serde(default)]
    pub ik: IkOptions,
    #[serde(default)]
    pub weights: TrajOptWeights,
    #[serde(default = "d_eps")]
    pub eps_safe: f64,
}

impl Default for RigidPlanConfig {
    fn default() -> Self {
        Self {
            steps_per_flow_frame: d_spf(),
            approach: Approach::default(),
            max_gripper_width: d_width(),
            ik: IkOptions::default(),
            weights: TrajOptWeights::default(),
            eps_safe: d_eps(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RigidPlan {
    /// World-frame object motion relative to frame 0, estimated from the flow.
    pub object_motion: ObjectPoseTrajectory,
    /// Chosen grasp, world frame.
    pub grasp: GraspProposal,
    pub ee_targets: Vec<SE3Pose>,
    pub trajopt: TrajOptResult,
    /// Object motion the robot executes, sampled at the flow frames.
    pub executed: ObjectPoseTrajectory,
}

/// Flow → poses → grasp → end-effector targets → IK endpoints → trajectory
/// optimization. `world_from_camera` is the pose of the flow's frame; `None`
/// means the flow is already in the world frame (+z up).
pub fn plan_rigid(
    flow: &ActionableFlow,
    world_from_camera: Option<&SE3Pose>,
    robot: &RobotModel,
    obstacles: &[Obstacle],
    config: &RigidPlanConfig,
) -> Result<RigidPlan, PipelineError> {
    if config.steps_per_flow_frame == 0 {
        return Err(PipelineError::InvalidConfig("steps_per_flow_frame must be at least 1".into()));
    }
    let cam = world_from_camera.copied().unwrap_or_else(SE3Pose::identity);
    let motion = flow_to_pose_trajectory(flow)?.to_world(&cam);
    let points: Vec<_> = flow.frame(0).iter().map(|p| cam.transform_point(p)).collect();
    let grasps = propose_grasp(&points, config.approach, config.max_gripper_width)?;
    let grasp = *grasps
        .proposals
        .first()
        .ok_or(PipelineError::NoGrasp(config.max_gripper_width))?;
    let ee_targets = compose_ee_trajectory(&motion, &grasp);

    let ik = |target: &SE3Pose, seed: &JointConfig, which| {
        solve_ik(robot, target, seed, &config.ik).map_err(|source| PipelineError::Ik { which, source })
    };
    let q_start = ik(&ee_targets[0], &robot.home_or_mid(), "first")?.q;
    let q_end = ik(&ee_targets[ee_targets.len() - 1], &q_start, "last")?.q;

    let spf = config.steps_per_flow_frame;
    let mut problem = TrajOptProblem::new(robot.clone(), q_start, q_end, (flow.frames - 1) * spf + 1);
    problem.weights = config.weights;
    problem.eps_safe = config.eps_safe;
    problem.obstacles = obstacles.to_vec();
    let trajopt = optimize_trajectory(&problem)?;

    let grasp_inv = grasp.grasp_pose.inverse();
    let mut poses = Vec::with_capacity(flow.frames);
    for q in trajopt.trajectory.configs.iter().step_by(spf) {
        let ee = robot.ee_pose(q).map_err(|source| PipelineError::Ik { which: "executed", source })?;
        poses.push(ee.compose(&grasp_inv));
    }
    Ok(RigidPlan {
        object_motion: motion,
        grasp,
        ee_targets,
        trajopt,
        executed: ObjectPoseTrajectory {
            poses,
            frame: PoseFrame::World,
        },
    })
}

fn d_candidates() -> usize {
    1
}
fn d_ladder() -> Vec<f64> {
    vec![0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistillConfig {
    /// Total candidates: the clean distillation plus `candidates − 1`
    /// corrupted variants.
    #[serde(default = "d_candidates")]
    pub candidates: usize,
    /// Noise sigma (m) of corrupted variant `k` is `noise_ladder[(k − 1) % len]`.
    #[serde(default = "d_ladder")]
    pub noise_ladder: Vec<f64>,
    #[serde(default)]
    pub dropout: f64,
    #[serde(default)]
    pub score: ScoreConfig,
}

impl Default for DistillConfig {
    fn default() -> Self {
        Self {
            candidates: d_candidates(),
            noise_ladder: d_ladder(),
            dropout: 0.0,
            score: ScoreConfig::default(),
        }
    }
}

/// Candidate 0 is `clean`; the others are corrupted copies. Returns the
/// scored candidates and the selected id.
pub fn select_flow(
    clean: &ActionableFlow,
    intr: &CameraIntrinsics,
    config: &DistillConfig,
    seed: u64,
) -> Result<(Vec<FlowCandidate>, u32), PipelineError> {
    if config.candidates == 0 {
        return Err(PipelineError::InvalidConfig("candidates must be at least 1".into()));
    }
    if config.candidates > 1 && config.noise_ladder.is_empty() {
        return Err(PipelineError::InvalidConfig("noise_ladder is empty".into()));
    }
    let mut flows = vec![(0u32, clean.clone())];
    for k in 1..config.candidates {
        let sigma = config.noise_ladder[(k - 1) % config.noise_ladder.len()];
        let stream = seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(k as u64);
        flows.push((k as u32, corrupt_flow(clean, sigma, config.dropout, stream)?));
    }
    let scored = score_candidates(flows, intr, &config.score);
    let id = select_candidate(&scored)?;
    Ok((scored, id))
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeformablePlan {
    pub correspondence: Vec<usize>,
    pub log: RolloutLog,
}

/// Nearest-keypoint correspondence followed by the receding-horizon rollout.
pub fn plan_deformable(
    flow: &ActionableFlow,
    dynamics: &DynamicsSpec,
    config: &MpcConfig,
) -> Result<DeformablePlan, PipelineError> {
    let (model, initial) = dynamics.build()?;
    let (correspondence, _) = build_correspondence(flow.frame(0), &initial.positions);
    let log = mpc_rollout(&model, &initial, flow, config, &correspondence)?;
    Ok(DeformablePlan { correspondence, log })
}
