//! Synthetic scenes standing in for the video, depth, tracking and
//! segmentation stack, plus the evaluation metrics.

mod bundle;
mod config;
mod metrics;
mod noise;
mod render;
mod rigid;
mod rope;

pub use bundle::{read_bundle, read_camera, sha256_hex, write_bundle, BundleManifest, CameraFile, FileHash};
pub use config::{
    demo_camera, overhead_camera, CameraSpec, Keyframe, MotionScript, NoiseSpec, ObjectSpec, RopeShape, SceneConfig,
};
pub use metrics::{evaluate_deformable, evaluate_rigid, Metrics, Thresholds};
pub use noise::corrupt_flow;
pub use rigid::{generate_rigid_scene, scripted_world_poses};
pub use rope::{generate_rope_scene, rope_centerline, MirrorFixture};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::deformable::{DeformableError, DynamicsSpec};
use crate::flow::{calibrate_depth, distill_flow, ActionableFlow, FlowError, Mask, MaskSequence, TrackSet};
use crate::geometry::{CameraIntrinsics, DepthMap, SE3Pose, Vec3};
use crate::rigid::{ObjectPoseTrajectory, RigidError};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scene config: {0}")]
    InvalidConfig(String),
    #[error("object leaves view at frame {frame}")]
    ObjectLeavesView { frame: usize },
    #[error("self-intersecting rope at frame {frame}")]
    SelfIntersecting { frame: usize },
    #[error("dropout leaves {0} keypoints, need at least 3")]
    TooFewKeypoints(usize),
    #[error("length mismatch: executed has {executed} frames, ground truth {gt}")]
    LengthMismatch { executed: usize, gt: usize },
    #[error("pose trajectories are in different frames")]
    FrameMismatch,
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {reason}")]
    Format { path: String, reason: String },
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Rigid(#[from] RigidError),
    #[error(transparent)]
    Deformable(#[from] DeformableError),
}

/// Everything a scene emits. Tracks and estimated depth carry the
/// configured scale error; ground truth is metric and in the camera frame,
/// except `gt_poses`, which are world-frame object motions.
#[derive(Clone, Debug, PartialEq)]
pub struct SceneBundle {
    pub config: SceneConfig,
    pub intrinsics: CameraIntrinsics,
    pub camera_pose: SE3Pose,
    pub tracks: TrackSet,
    pub masks: MaskSequence,
    pub depth: Vec<DepthMap>,
    /// Trusted metric depth of frame 0.
    pub reference_depth: DepthMap,
    pub gt_flow: ActionableFlow,
    pub gt_poses: Option<ObjectPoseTrajectory>,
    pub gt_membership: Vec<usize>,
    /// Rope scenes: the particle model matching the flow.
    pub dynamics: Option<DynamicsSpec>,
    pub fixture: Option<MirrorFixture>,
}

impl SceneBundle {
    pub fn frames(&self) -> usize {
        self.tracks.frames
    }
}

/// Rigid or rope scene, by object type.
pub fn generate_scene(config: &SceneConfig) -> Result<SceneBundle, SimError> {
    if config.object.is_rigid() {
        generate_rigid_scene(config)
    } else {
        generate_rope_scene(config)
    }
}

/// Depth calibration followed by mask grounding: the perception half of
/// the pipeline. Returns the flow and the calibration scale.
pub fn distill_bundle(bundle: &SceneBundle) -> Result<(ActionableFlow, f64), SimError> {
    let (_, scale) = calibrate_depth(&bundle.depth, &bundle.reference_depth)?;
    let tracks = bundle.tracks.scaled(scale);
    let flow = distill_flow(&tracks, &bundle.masks, &bundle.intrinsics, bundle.config.object.label())?;
    Ok((flow, scale))
}

pub(crate) mod streams {
    pub const SURFACE: u64 = 1;
    pub const DISTRACTORS: u64 = 2;
    pub const TRACK_NOISE: u64 = 3;
    pub const DROPOUT: u64 = 4;
    pub const CORRUPT: u64 = 5;
    pub const DEPTH: u64 = 100;
}

pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub(crate) fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Static ground points that never project within 3 px of the frame-0
/// object mask, in the camera frame.
fn sample_distractors(config: &SceneConfig, intr: &CameraIntrinsics, cam: &SE3Pose, mask0: &Mask) -> Vec<Vec3> {
    let mut rng = stream_rng(config.seed, streams::DISTRACTORS);
    let mut out = Vec::with_capacity(config.distractor_points);
    let mut attempts = 0;
    while out.len() < config.distractor_points && attempts < 100 * config.distractor_points.max(1) {
        attempts += 1;
        let u = rng.random_range(0.0..intr.width as f64);
        let v = rng.random_range(0.0..intr.height as f64);
        let ray = intr.ray(u, v);
        let dir = cam.transform_vector(&ray);
        if dir.z > -1e-9 {
            continue;
        }
        let depth = (config.ground_height - cam.translation.z) / dir.z;
        if !(depth > 0.0) || render::near_mask(mask0, u, v, 3) {
            continue;
        }
        out.push(ray * depth);
    }
    out
}

/// Observed tracks for clean per-frame object points (camera frame):
/// object tracks first, then distractors; noise, dropout and scale error
/// applied. Returns the tracks and the object tracks visible throughout.
fn observe_tracks(
    config: &SceneConfig,
    intr: &CameraIntrinsics,
    cam: &SE3Pose,
    object: &[Vec<Vec3>],
    mask0: &Mask,
) -> Result<(TrackSet, Vec<usize>), SimError> {
    let frames = object.len();
    let n_obj = object[0].len();
    let distractors = sample_distractors(config, intr, cam, mask0);
    let m = n_obj + distractors.len();
    let mut lost_from = vec![frames; m];
    let mut drop_rng = stream_rng(config.seed, streams::DROPOUT);
    for l in lost_from.iter_mut() {
        if drop_rng.random_range(0.0..1.0) < config.noise.dropout_prob {
            *l = drop_rng.random_range(1..frames);
        }
    }
    let mut noise_rng = stream_rng(config.seed, streams::TRACK_NOISE);
    let sigma = config.noise.track_sigma;
    let scale = config.depth_scale_error;
    let mut positions = Vec::with_capacity(frames * m);
    let mut visible = Vec::with_capacity(frames * m);
    for (t, obj) in object.iter().enumerate() {
        for (i, clean) in obj.iter().chain(&distractors).enumerate() {
            let in_view = intr.project(clean).is_ok_and(|(u, v)| intr.contains(u, v));
            let mut p = *clean;
            if sigma > 0.0 {
                p += Vec3::new(gaussian(&mut noise_rng), gaussian(&mut noise_rng), gaussian(&mut noise_rng)) * sigma;
            }
            positions.push(p * scale);
            visible.push(in_view && t < lost_from[i]);
        }
    }
    let tracks = TrackSet::new(frames, m, positions, visible)?;
    let membership = (0..n_obj).filter(|&i| tracks.visible_throughout(i)).collect();
    Ok((tracks, membership))
}

/// Estimated depth: true depth with the scale error and relative noise.
fn estimated_depth(config: &SceneConfig, truth: &[DepthMap]) -> Vec<DepthMap> {
    truth
        .iter()
        .enumerate()
        .map(|(t, d)| {
            let mut rng = stream_rng(config.seed, streams::DEPTH + t as u64);
            let mut out = d.scaled(config.depth_scale_error);
            if config.noise.depth_sigma > 0.0 {
                for v in out.values.iter_mut().filter(|v| **v > 0.0) {
                    *v = (*v * (1.0 + config.noise.depth_sigma * gaussian(&mut rng))).max(0.0);
                }
            }
            out
        })
        .collect()
}

/// Clean object flow of the member tracks.
fn member_flow(object: &[Vec<Vec3>], membership: &[usize], label: &str) -> Result<ActionableFlow, SimError> {
    if membership.is_empty() {
        return Err(FlowError::NotGrounded(label.to_string()).into());
    }
    let frames = object
        .iter()
        .map(|f| membership.iter().map(|&i| f[i]).collect())
        .collect();
    Ok(ActionableFlow::from_frames(frames, label)?)
}
