use std::path::Path;

use serde::{Deserialize, Serialize};

use super::SimError;
use crate::geometry::{CameraIntrinsics, SE3Pose, Vec3};
use crate::trajopt::Obstacle;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraSpec {
    pub intrinsics: CameraIntrinsics,
    pub eye: [f64; 3],
    pub target: [f64; 3],
    #[serde(default = "d_up")]
    pub up: [f64; 3],
}

fn d_up() -> [f64; 3] {
    [0.0, 0.0, 1.0]
}

impl CameraSpec {
    /// World pose of the camera (`world_from_camera`).
    pub fn pose(&self) -> SE3Pose {
        SE3Pose::look_at(Vec3::from(self.eye), Vec3::from(self.target), Vec3::from(self.up))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObjectSpec {
    /// Full edge lengths; the object frame sits at the box centre.
    Box { size: [f64; 3] },
    /// Axis along object z, frame at the centre.
    Cylinder { radius: f64, height: f64 },
    /// Particle 0 at `anchor`, initial tangent along `heading` (rad, in the
    /// ground plane).
    Rope {
        length: f64,
        particles: usize,
        #[serde(default = "d_rope_radius")]
        radius: f64,
        anchor: [f64; 3],
        #[serde(default)]
        heading: f64,
    },
}

fn d_rope_radius() -> f64 {
    0.01
}

impl ObjectSpec {
    pub fn is_rigid(&self) -> bool {
        !matches!(self, ObjectSpec::Rope { .. })
    }

    pub fn label(&self) -> &'static str {
        match self {
            ObjectSpec::Box { .. } => "box",
            ObjectSpec::Cylinder { .. } => "cylinder",
            ObjectSpec::Rope { .. } => "rope",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Keyframe {
    /// Frame index of this keyframe.
    pub t: usize,
    pub xyz: [f64; 3],
    #[serde(default)]
    pub rpy: [f64; 3],
}

impl Keyframe {
    pub fn pose(&self) -> SE3Pose {
        SE3Pose::from_xyz_rpy(Vec3::from(self.xyz), Vec3::from(self.rpy))
    }
}

/// Rope centreline shape, as a tangent angle growing linearly in arc length.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum RopeShape {
    Straight,
    /// Half-turn arc.
    UShape,
    /// Total turning angle in radians, counter-clockwise positive.
    Arc { turn: f64 },
}

impl RopeShape {
    pub fn turn(&self) -> f64 {
        match self {
            RopeShape::Straight => 0.0,
            RopeShape::UShape => std::f64::consts::PI,
            RopeShape::Arc { turn } => *turn,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MotionScript {
    /// World poses of the object frame; frame count is the last `t` + 1.
    Keyframes { keyframes: Vec<Keyframe> },
    Rope {
        from: RopeShape,
        to: RopeShape,
        frames: usize,
        /// Keep particle 0 in place (otherwise the centroid stays put).
        #[serde(default)]
        pinned: bool,
        /// Build the mirrored-rope fixture instead of interpolating shapes.
        #[serde(default)]
        mirrored: bool,
    },
}

impl MotionScript {
    pub fn frames(&self) -> usize {
        match self {
            MotionScript::Keyframes { keyframes } => keyframes.last().map_or(0, |k| k.t + 1),
            MotionScript::Rope { frames, .. } => *frames,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSpec {
    /// Per-coordinate track noise (m).
    pub track_sigma: f64,
    /// Relative depth noise.
    pub depth_sigma: f64,
    /// Per-track probability of being lost at a random frame.
    pub dropout_prob: f64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            track_sigma: 0.001,
            depth_sigma: 0.01,
            dropout_prob: 0.02,
        }
    }
}

impl NoiseSpec {
    pub fn none() -> Self {
        Self {
            track_sigma: 0.0,
            depth_sigma: 0.0,
            dropout_prob: 0.0,
        }
    }
}

fn d_samples() -> usize {
    400
}
fn d_distractors() -> usize {
    300
}
fn d_scale() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    #[serde(default)]
    pub seed: u64,
    pub camera: CameraSpec,
    pub object: ObjectSpec,
    #[serde(default = "d_samples")]
    pub surface_samples: usize,
    pub motion_script: MotionScript,
    #[serde(default)]
    pub noise: NoiseSpec,
    #[serde(default = "d_distractors")]
    pub distractor_points: usize,
    /// Unknown global scale of the estimated depth and tracks; undone by
    /// depth calibration against the reference frame.
    #[serde(default = "d_scale")]
    pub depth_scale_error: f64,
    #[serde(default)]
    pub ground_height: f64,
    /// Workspace obstacles for the robot planner; not rendered.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub obstacles: Vec<Obstacle>,
}

impl SceneConfig {
    pub fn from_json_str(text: &str) -> Result<Self, SimError> {
        let cfg: SceneConfig = serde_json::from_str(text).map_err(|e| SimError::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path).map_err(|source| SimError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json_str(&text).map_err(|e| match e {
            SimError::InvalidConfig(m) => SimError::InvalidConfig(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene config serializes")
    }

    pub fn frames(&self) -> usize {
        self.motion_script.frames()
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::InvalidConfig(m.to_string()));
        self.camera.intrinsics.validate().map_err(|e| SimError::InvalidConfig(e.to_string()))?;
        if (Vec3::from(self.camera.eye) - Vec3::from(self.camera.target)).norm() < 1e-9 {
            return bad("camera eye and target coincide");
        }
        let pos = |v: f64| v > 0.0 && v.is_finite();
        match &self.object {
            ObjectSpec::Box { size } => {
                if !size.iter().all(|s| pos(*s)) {
                    return bad("box dimensions must be positive");
                }
            }
            ObjectSpec::Cylinder { radius, height } => {
                if !(pos(*radius) && pos(*height)) {
                    return bad("cylinder dimensions must be positive");
                }
            }
            ObjectSpec::Rope {
                length, particles, radius, ..
            } => {
                if !(pos(*length) && pos(*radius)) || *particles < 3 {
                    return bad("rope needs positive length and radius and at least 3 particles");
                }
            }
        }
        match (&self.motion_script, self.object.is_rigid()) {
            (MotionScript::Keyframes { keyframes }, true) => {
                if keyframes.len() < 2 {
                    return bad("motion script needs at least 2 keyframes");
                }
                if keyframes[0].t != 0 {
                    return bad("first keyframe must be at t = 0");
                }
                if keyframes.windows(2).any(|w| w[1].t <= w[0].t) {
                    return bad("keyframe times must increase");
                }
                if self.surface_samples < 10 {
                    return bad("surface_samples must be at least 10");
                }
            }
            (MotionScript::Rope { frames, .. }, false) => {
                if *frames < 2 {
                    return bad("rope script needs at least 2 frames");
                }
            }
            _ => return bad("motion script kind does not match the object type"),
        }
        let n = &self.noise;
        if !(n.track_sigma >= 0.0 && n.depth_sigma >= 0.0 && (0.0..1.0).contains(&n.dropout_prob)) {
            return bad("noise sigmas must be non-negative and dropout_prob in [0, 1)");
        }
        if !pos(self.depth_scale_error) {
            return bad("depth_scale_error must be positive");
        }
        for o in &self.obstacles {
            o.validate().map_err(|e| SimError::InvalidConfig(e.to_string()))?;
        }
        Ok(())
    }

    /// Box picked at (0.5, −0.15), lifted 0.15 m, carried over the demo
    /// obstacle and set down at (0.5, 0.15).
    pub fn pick_lift_place(seed: u64) -> Self {
        let h = 0.05;
        let key = |t, x: f64, y: f64, z: f64| Keyframe {
            t,
            xyz: [x, y, z],
            rpy: [0.0, 0.0, 0.0],
        };
        Self {
            seed,
            camera: demo_camera(),
            object: ObjectSpec::Box { size: [0.05, 0.04, h] },
            surface_samples: d_samples(),
            motion_script: MotionScript::Keyframes {
                keyframes: vec![
                    key(0, 0.5, -0.15, h / 2.0),
                    key(12, 0.5, -0.15, h / 2.0 + 0.15),
                    key(28, 0.5, 0.15, h / 2.0 + 0.15),
                    key(40, 0.5, 0.15, h / 2.0),
                ],
            },
            noise: NoiseSpec::default(),
            distractor_points: d_distractors(),
            depth_scale_error: 1.0,
            ground_height: 0.0,
            obstacles: vec![Obstacle::sphere(Vec3::new(0.5, 0.0, 0.1), 0.05)],
        }
    }

    /// U-shaped rope pulled straight by its free end, particle 0 pinned.
    pub fn rope_straightening(seed: u64) -> Self {
        Self {
            seed,
            camera: overhead_camera(),
            object: ObjectSpec::Rope {
                length: 0.5,
                particles: 26,
                radius: 0.01,
                anchor: [-0.25, -0.08, 0.01],
                heading: 0.0,
            },
            surface_samples: d_samples(),
            motion_script: MotionScript::Rope {
                from: RopeShape::UShape,
                to: RopeShape::Straight,
                frames: 41,
                pinned: true,
                mirrored: false,
            },
            noise: NoiseSpec::none(),
            distractor_points: d_distractors(),
            depth_scale_error: 1.0,
            ground_height: 0.0,
            obstacles: Vec::new(),
        }
    }

    /// Straight rope whose goal is its own point set with the order reversed.
    pub fn mirrored_rope(seed: u64) -> Self {
        let mut cfg = Self::rope_straightening(seed);
        cfg.object = ObjectSpec::Rope {
            length: 0.4,
            particles: 21,
            radius: 0.01,
            anchor: [-0.2, 0.0, 0.01],
            heading: 0.0,
        };
        cfg.motion_script = MotionScript::Rope {
            from: RopeShape::Straight,
            to: RopeShape::Straight,
            frames: 61,
            pinned: false,
            mirrored: true,
        };
        cfg
    }
}

/// Oblique view of the tabletop used by the rigid demo.
pub fn demo_camera() -> CameraSpec {
    CameraSpec {
        intrinsics: CameraIntrinsics {
            fx: 600.0,
            fy: 600.0,
            cx: 320.0,
            cy: 240.0,
            width: 640,
            height: 480,
        },
        eye: [1.3, 0.0, 0.6],
        target: [0.5, 0.0, 0.1],
        up: d_up(),
    }
}

/// Camera looking straight down at the origin from 1 m.
pub fn overhead_camera() -> CameraSpec {
    CameraSpec {
        intrinsics: CameraIntrinsics {
            fx: 500.0,
            fy: 500.0,
            cx: 320.0,
            cy: 240.0,
            width: 640,
            height: 480,
        },
        eye: [0.0, 0.0, 1.0],
        target: [0.0, 0.0, 0.0],
        up: [0.0, 1.0, 0.0],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_configs_validate_and_round_trip() {
        for cfg in [
            SceneConfig::pick_lift_place(3),
            SceneConfig::rope_straightening(1),
            SceneConfig::mirrored_rope(2),
        ] {
            cfg.validate().unwrap();
            let back = SceneConfig::from_json_str(&cfg.to_json_string()).unwrap();
            assert_eq!(back, cfg);
        }
        assert_eq!(SceneConfig::pick_lift_place(0).frames(), 41);
    }

    #[test]
    fn rejects_bad_configs() {
        let mut cfg = SceneConfig::pick_lift_place(0);
        cfg.object = ObjectSpec::Box { size: [0.05, 0.0, 0.05] };
        assert!(cfg.validate().unwrap_err().to_string().contains("positive"));
        let mut cfg = SceneConfig::pick_lift_place(0);
        cfg.motion_script = MotionScript::Keyframes {
            keyframes: vec![Keyframe {
                t: 0,
                xyz: [0.5, 0.0, 0.0],
                rpy: [0.0; 3],
            }],
        };
        assert!(cfg.validate().unwrap_err().to_string().contains("2 keyframes"));
        let mut cfg = SceneConfig::rope_straightening(0);
        cfg.motion_script = SceneConfig::pick_lift_place(0).motion_script;
        assert!(cfg.validate().is_err());
        assert!(SceneConfig::from_json_str(r#"{"seed": 1}"#).is_err());
    }

    #[test]
    fn overhead_camera_looks_down() {
        let pose = overhead_camera().pose();
        let z = pose.rotation.column(2).into_owned();
        assert!((z - Vec3::new(0.0, 0.0, -1.0)).norm() < 1e-12);
        assert!(pose.is_valid(1e-12));
    }
}
