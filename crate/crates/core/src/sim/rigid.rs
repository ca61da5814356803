use super::config::{MotionScript, ObjectSpec, SceneConfig};
use super::render::{hull_mask, render_depth, sample_box_surface, sample_cylinder_surface, Solid};
use super::{estimated_depth, member_flow, observe_tracks, stream_rng, streams, SceneBundle, SimError};
use crate::flow::MaskSequence;
use crate::geometry::{SE3Pose, Vec3};
use crate::rigid::{ObjectPoseTrajectory, PoseFrame};

/// World pose of the object at every frame, screw-interpolated between
/// keyframes. Keyframe frames reproduce the keyframe pose exactly.
pub fn scripted_world_poses(config: &SceneConfig) -> Result<Vec<SE3Pose>, SimError> {
    let MotionScript::Keyframes { keyframes } = &config.motion_script else {
        return Err(SimError::InvalidConfig("rigid scenes need a keyframe script".into()));
    };
    let mut out = Vec::with_capacity(config.frames());
    for w in keyframes.windows(2) {
        let (a, b) = (w[0].pose(), w[1].pose());
        let span = (w[1].t - w[0].t) as f64;
        for t in w[0].t..w[1].t {
            out.push(if t == w[0].t {
                a
            } else {
                a.interpolate(&b, (t - w[0].t) as f64 / span)
            });
        }
    }
    out.push(keyframes[keyframes.len() - 1].pose());
    Ok(out)
}

/// Rigid box or cylinder following the keyframe script.
pub fn generate_rigid_scene(config: &SceneConfig) -> Result<SceneBundle, SimError> {
    config.validate()?;
    let intr = config.camera.intrinsics;
    let cam = config.camera.pose();
    let cam_inv = cam.inverse();
    let world = scripted_world_poses(config)?;
    let frames = world.len();

    let mut rng = stream_rng(config.seed, streams::SURFACE);
    let (local, solid): (Vec<Vec3>, Box<dyn Fn(SE3Pose) -> Solid>) = match config.object {
        ObjectSpec::Box { size } => (
            sample_box_surface(size, config.surface_samples, &mut rng),
            Box::new(move |pose| Solid::Box {
                pose,
                half: Vec3::from(size) / 2.0,
            }),
        ),
        ObjectSpec::Cylinder { radius, height } => (
            sample_cylinder_surface(radius, height, config.surface_samples, &mut rng),
            Box::new(move |pose| Solid::Cylinder {
                pose,
                radius,
                half_height: height / 2.0,
            }),
        ),
        ObjectSpec::Rope { .. } => return Err(SimError::InvalidConfig("rope object in a rigid scene".into())),
    };

    let mut object = Vec::with_capacity(frames);
    let mut masks = Vec::with_capacity(frames);
    for (t, w) in world.iter().enumerate() {
        let to_cam = cam_inv.compose(w);
        let pts: Vec<Vec3> = local.iter().map(|p| to_cam.transform_point(p)).collect();
        let mut pix = Vec::with_capacity(pts.len());
        for p in &pts {
            match intr.project(p) {
                Ok((u, v)) if intr.contains(u, v) => pix.push((u, v)),
                _ => return Err(SimError::ObjectLeavesView { frame: t }),
            }
        }
        masks.push(hull_mask(&intr, &pix));
        object.push(pts);
    }
    let (tracks, membership) = observe_tracks(config, &intr, &cam, &object, &masks[0])?;
    let truth: Vec<_> = world
        .iter()
        .map(|w| render_depth(&intr, &cam, &[solid(*w)], config.ground_height))
        .collect();
    let depth = estimated_depth(config, &truth);

    let w0_inv = world[0].inverse();
    let mut poses: Vec<SE3Pose> = world.iter().map(|w| w.compose(&w0_inv)).collect();
    poses[0] = SE3Pose::identity();

    Ok(SceneBundle {
        config: config.clone(),
        intrinsics: intr,
        camera_pose: cam,
        tracks,
        masks: MaskSequence::new(masks)?,
        depth,
        reference_depth: truth[0].clone(),
        gt_flow: member_flow(&object, &membership, config.object.label())?,
        gt_poses: Some(ObjectPoseTrajectory {
            poses,
            frame: PoseFrame::World,
        }),
        gt_membership: membership,
        dynamics: None,
        fixture: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::config::{Keyframe, NoiseSpec};
    use crate::sim::distill_bundle;

    fn lift_config() -> SceneConfig {
        let mut cfg = SceneConfig::pick_lift_place(7);
        cfg.motion_script = MotionScript::Keyframes {
            keyframes: vec![
                Keyframe {
                    t: 0,
                    xyz: [0.5, 0.0, 0.025],
                    rpy: [0.0; 3],
                },
                Keyframe {
                    t: 40,
                    xyz: [0.5, 0.0, 0.125],
                    rpy: [0.0; 3],
                },
            ],
        };
        cfg.noise = NoiseSpec::none();
        cfg
    }

    #[test]
    fn identity_script_is_static() {
        let mut cfg = lift_config();
        cfg.motion_script = MotionScript::Keyframes {
            keyframes: vec![
                Keyframe {
                    t: 0,
                    xyz: [0.5, 0.0, 0.025],
                    rpy: [0.0; 3],
                },
                Keyframe {
                    t: 5,
                    xyz: [0.5, 0.0, 0.025],
                    rpy: [0.0; 3],
                },
            ],
        };
        let b = generate_rigid_scene(&cfg).unwrap();
        for t in 0..6 {
            assert_eq!(b.gt_flow.frame(t), b.gt_flow.frame(0));
            assert_eq!(b.gt_poses.as_ref().unwrap().poses[t], SE3Pose::identity());
        }
    }

    #[test]
    fn z_lift_is_linear() {
        let b = generate_rigid_scene(&lift_config()).unwrap();
        let poses = &b.gt_poses.unwrap().poses;
        assert_eq!(poses.len(), 41);
        for (t, p) in poses.iter().enumerate() {
            let want = Vec3::new(0.0, 0.0, 0.1 * t as f64 / 40.0);
            assert!((p.translation - want).norm() < 1e-12, "frame {t}");
            assert!(p.rotation_distance(&SE3Pose::identity()) < 1e-12);
        }
        assert_eq!(poses[40].translation, Vec3::new(0.0, 0.0, 0.1));
    }

    #[test]
    fn zero_noise_distillation_closes() {
        let b = generate_rigid_scene(&lift_config()).unwrap();
        assert_eq!(b.gt_membership.len(), 400);
        assert_eq!(b.tracks.points, 700);
        let (flow, scale) = distill_bundle(&b).unwrap();
        assert_eq!(scale, 1.0);
        assert_eq!(flow.keypoints, b.gt_flow.keypoints);
        let worst = flow
            .positions()
            .iter()
            .zip(b.gt_flow.positions())
            .map(|(a, g)| (a - g).norm())
            .fold(0.0, f64::max);
        assert!(worst < 1e-9);
    }

    #[test]
    fn scale_error_is_undone_by_calibration() {
        let mut cfg = lift_config();
        cfg.depth_scale_error = 1.3;
        let b = generate_rigid_scene(&cfg).unwrap();
        let (flow, scale) = distill_bundle(&b).unwrap();
        assert!((scale * 1.3 - 1.0).abs() < 1e-12);
        for (a, g) in flow.positions().iter().zip(b.gt_flow.positions()) {
            assert!((a - g).norm() < 1e-9);
        }
    }

    #[test]
    fn object_leaving_view_is_an_error() {
        let mut cfg = lift_config();
        cfg.motion_script = MotionScript::Keyframes {
            keyframes: vec![
                Keyframe {
                    t: 0,
                    xyz: [0.5, 0.0, 0.025],
                    rpy: [0.0; 3],
                },
                Keyframe {
                    t: 10,
                    xyz: [0.5, 3.0, 0.025],
                    rpy: [0.0; 3],
                },
            ],
        };
        let err = generate_rigid_scene(&cfg).unwrap_err();
        assert!(err.to_string().contains("object leaves view"), "{err}");
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = SceneConfig::pick_lift_place(11);
        let a = generate_rigid_scene(&cfg).unwrap();
        let b = generate_rigid_scene(&cfg).unwrap();
        assert_eq!(a, b);
        let mut other = cfg.clone();
        other.seed = 12;
        assert_ne!(generate_rigid_scene(&other).unwrap().tracks, a.tracks);
    }
}
