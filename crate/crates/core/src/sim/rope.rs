use serde::{Deserialize, Serialize};

use super::config::{MotionScript, ObjectSpec, SceneConfig};
use super::render::{hull_mask, render_depth, Solid};
use super::{estimated_depth, member_flow, observe_tracks, SceneBundle, SimError};
use crate::deformable::{chamfer_cost, flow_cost, DynamicsSpec, Edge, GripperAction, MassSpringModel, ParticleState};
use crate::flow::MaskSequence;
use crate::geometry::{centroid, SE3Pose, Vec3};

/// Polyline of `n` particles with equal spacing `length / (n − 1)` whose
/// tangent turns linearly from `heading` by `turn` radians overall. Total
/// polyline length is `length` for every `turn`.
pub fn rope_centerline(anchor: Vec3, heading: f64, length: f64, n: usize, turn: f64) -> Vec<Vec3> {
    let seg = length / (n - 1) as f64;
    let mut pts = Vec::with_capacity(n);
    let mut p = anchor;
    pts.push(p);
    for i in 0..n - 1 {
        let phi = heading + turn * (i as f64 + 0.5) / (n - 1) as f64;
        p += Vec3::new(phi.cos(), phi.sin(), 0.0) * seg;
        pts.push(p);
    }
    pts
}

fn orient(a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

fn segments_cross(a: &Vec3, b: &Vec3, c: &Vec3, d: &Vec3) -> bool {
    let (d1, d2) = (orient(a, b, c), orient(a, b, d));
    let (d3, d4) = (orient(c, d, a), orient(c, d, b));
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

/// Whether non-adjacent segments cross or come within a quarter spacing,
/// judged in the ground plane.
fn self_intersects(pts: &[Vec3]) -> bool {
    let n = pts.len();
    let seg = (pts[1] - pts[0]).norm();
    for i in 0..n - 1 {
        for j in i + 2..n - 1 {
            if segments_cross(&pts[i], &pts[i + 1], &pts[j], &pts[j + 1]) {
                return true;
            }
        }
        for j in i + 2..n {
            let d = pts[i] - pts[j];
            if d.x.hypot(d.y) < 0.25 * seg {
                return true;
            }
        }
    }
    false
}

/// Mirrored-rope fixture data, kept with the bundle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MirrorFixture {
    /// Particle pinned at the rope centre.
    pub pivot: usize,
    /// Chamfer distance between the initial state and the goal.
    pub chamfer_start: f64,
    /// Correspondence cost of the initial state against the goal.
    pub flow_cost_start: f64,
    /// Chamfer-to-goal after one step of zero action.
    pub zero_step_chamfer: f64,
    /// Best Chamfer-to-goal over a grid of one-step gripper moves.
    pub grid_best_chamfer: f64,
    pub grid_best_delta: [f64; 3],
}

/// Rope scene. Interpolates the tangent-angle turn between the two shapes,
/// or, with `mirrored`, records the particle model dragged by its free end
/// through a U-turn so the goal is the start reversed and shifted sideways.
pub fn generate_rope_scene(config: &SceneConfig) -> Result<SceneBundle, SimError> {
    config.validate()?;
    let ObjectSpec::Rope {
        length,
        particles,
        radius,
        anchor,
        heading,
    } = config.object
    else {
        return Err(SimError::InvalidConfig("rope scenes need a rope object".into()));
    };
    let MotionScript::Rope {
        from,
        to,
        frames,
        pinned,
        mirrored,
    } = config.motion_script
    else {
        return Err(SimError::InvalidConfig("rope scenes need a rope script".into()));
    };
    let intr = config.camera.intrinsics;
    let cam = config.camera.pose();
    let cam_inv = cam.inverse();
    let anchor = Vec3::from(anchor);

    let (world, fixture, dynamics) = if mirrored {
        let (world, fixture, model) = mirrored_world(anchor, heading, length, particles, frames, &cam)?;
        (world, Some(fixture), model)
    } else {
        let mut world: Vec<Vec<Vec3>> = Vec::with_capacity(frames);
        for t in 0..frames {
            let s = t as f64 / (frames - 1) as f64;
            let turn = (1.0 - s) * from.turn() + s * to.turn();
            let mut pts = rope_centerline(anchor, heading, length, particles, turn);
            if self_intersects(&pts) {
                return Err(SimError::SelfIntersecting { frame: t });
            }
            if !pinned && t > 0 {
                let shift = centroid(&world[0]) - centroid(&pts);
                pts.iter_mut().for_each(|p| *p += shift);
            }
            world.push(pts);
        }
        let cam_pts: Vec<Vec3> = world[0].iter().map(|p| cam_inv.transform_point(p)).collect();
        let mut model = MassSpringModel::chain(&cam_pts);
        model.attachment = vec![particles - 1];
        if pinned {
            model.fixed = vec![0];
        }
        (world, None, model)
    };

    let object: Vec<Vec<Vec3>> = world
        .iter()
        .map(|f| f.iter().map(|p| cam_inv.transform_point(p)).collect())
        .collect();
    let mut masks = Vec::with_capacity(frames);
    for (t, pts) in object.iter().enumerate() {
        let mut pix = Vec::with_capacity(pts.len());
        for p in pts {
            match intr.project(p) {
                Ok((u, v)) if intr.contains(u, v) => pix.push((u, v)),
                _ => return Err(SimError::ObjectLeavesView { frame: t }),
            }
        }
        masks.push(hull_mask(&intr, &pix));
    }
    let (tracks, membership) = observe_tracks(config, &intr, &cam, &object, &masks[0])?;
    let truth: Vec<_> = world
        .iter()
        .map(|f| {
            let solids: Vec<Solid> = f.iter().map(|c| Solid::Sphere { center: *c, radius }).collect();
            render_depth(&intr, &cam, &solids, config.ground_height)
        })
        .collect();
    let depth = estimated_depth(config, &truth);
    dynamics.validate()?;
    let mut spec = DynamicsSpec::from_model(&dynamics, &ParticleState::at_rest(object[0].clone()));
    spec.camera_pose = Some(cam);

    Ok(SceneBundle {
        config: config.clone(),
        intrinsics: intr,
        camera_pose: cam,
        tracks,
        masks: MaskSequence::new(masks)?,
        depth,
        reference_depth: truth[0].clone(),
        gt_flow: member_flow(&object, &membership, config.object.label())?,
        gt_poses: None,
        gt_membership: membership,
        dynamics: Some(spec),
        fixture,
    })
}

/// Frames at the end of the mirrored script with the gripper at rest.
const MIRROR_SETTLE_FRAMES: usize = 12;

/// Fixture model parameters: stiff and lightly damped so the trailing half
/// follows the swing, with enough substeps to stay stable.
const MIRROR_STIFFNESS: f64 = 2000.0;
const MIRROR_MASS: f64 = 0.05;
const MIRROR_DAMPING: f64 = 0.1;
const MIRROR_SUBSTEPS: usize = 40;
/// Sideways offset of alternate particles; the zig-zag makes the strip of
/// triangles rigid in the ground plane.
const MIRROR_ZIGZAG: f64 = 0.01;

type MirrorWorld = (Vec<Vec<Vec3>>, MirrorFixture, MassSpringModel);

/// Rope pinned at its centre, with a slight zig-zag and second-neighbour
/// springs for bending stiffness. The gripper swings the free end half a
/// turn about the pin, so the goal is nearly the start point set with the
/// order reversed.
fn mirrored_world(
    anchor: Vec3,
    heading: f64,
    length: f64,
    n: usize,
    frames: usize,
    cam: &SE3Pose,
) -> Result<MirrorWorld, SimError> {
    if n.is_multiple_of(2) || frames <= MIRROR_SETTLE_FRAMES + 1 {
        return Err(SimError::InvalidConfig(format!(
            "mirrored rope needs an odd particle count and more than {} frames",
            MIRROR_SETTLE_FRAMES + 1
        )));
    }
    let cam_inv = cam.inverse();
    let left = Vec3::new(-heading.sin(), heading.cos(), 0.0);
    let start: Vec<Vec3> = rope_centerline(anchor, heading, length, n, 0.0)
        .into_iter()
        .enumerate()
        .map(|(i, p)| p + left * if i % 2 == 0 { MIRROR_ZIGZAG } else { -MIRROR_ZIGZAG })
        .collect();
    let cam_pts: Vec<Vec3> = start.iter().map(|p| cam_inv.transform_point(p)).collect();
    let mut model = MassSpringModel::chain(&cam_pts);
    for i in 0..n - 2 {
        model.edges.push(Edge {
            i,
            j: i + 2,
            rest_length: (cam_pts[i + 2] - cam_pts[i]).norm(),
        });
    }
    model.stiffness = MIRROR_STIFFNESS;
    model.mass = MIRROR_MASS;
    model.damping = MIRROR_DAMPING;
    model.substeps = MIRROR_SUBSTEPS;
    let pivot = n / 2;
    model.attachment = vec![n - 1];
    model.fixed = vec![pivot];
    let centre = start[pivot];
    let arm = start[n - 1] - centre;
    let swing = frames - 1 - MIRROR_SETTLE_FRAMES;
    let head_at = |t: usize| {
        let x = std::f64::consts::PI * t.min(swing) as f64 / swing as f64;
        let a = std::f64::consts::PI * (1.0 - x.cos()) / 2.0;
        let (s, c) = a.sin_cos();
        centre + Vec3::new(c * arm.x - s * arm.y, s * arm.x + c * arm.y, arm.z)
    };
    let mut state = ParticleState::at_rest(cam_pts.clone());
    let mut world = vec![start];
    for t in 1..frames {
        let action = GripperAction {
            delta: cam_inv.transform_vector(&(head_at(t) - head_at(t - 1))),
        };
        model.step_in_place(&mut state, &action)?;
        world.push(state.positions.iter().map(|p| cam.transform_point(p)).collect());
    }
    let goal = state.positions;
    let identity: Vec<usize> = (0..n).collect();
    let initial = ParticleState::at_rest(cam_pts);
    let score = |a: &GripperAction| -> Result<f64, SimError> {
        Ok(chamfer_cost(&model.step(&initial, a)?.positions, &goal)?)
    };
    let cap = model.action_cap;
    let fwd = Vec3::new(heading.cos(), heading.sin(), 0.0);
    let mut grid_best = (f64::INFINITY, Vec3::zeros());
    for i in -4..=4 {
        for j in -4..=4 {
            let dw = (fwd * i as f64 + left * j as f64) * (cap / 4.0);
            let c = score(&GripperAction {
                delta: cam_inv.transform_vector(&dw),
            })?;
            if c < grid_best.0 {
                grid_best = (c, dw);
            }
        }
    }
    let fixture = MirrorFixture {
        pivot,
        chamfer_start: chamfer_cost(&initial.positions, &goal)?,
        flow_cost_start: flow_cost(&initial.positions, &goal, &identity)?,
        zero_step_chamfer: score(&GripperAction::default())?,
        grid_best_chamfer: grid_best.0,
        grid_best_delta: [grid_best.1.x, grid_best.1.y, grid_best.1.z],
    };
    Ok((world, fixture, model))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::config::RopeShape;

    fn rope_cfg(from: RopeShape, to: RopeShape, pinned: bool) -> SceneConfig {
        let mut cfg = SceneConfig::rope_straightening(3);
        cfg.motion_script = MotionScript::Rope {
            from,
            to,
            frames: 21,
            pinned,
            mirrored: false,
        };
        cfg
    }

    #[test]
    fn centerline_spacing_and_length() {
        for turn in [0.0, 1.0, std::f64::consts::PI] {
            let pts = rope_centerline(Vec3::zeros(), 0.3, 0.5, 26, turn);
            for w in pts.windows(2) {
                assert!(((w[1] - w[0]).norm() - 0.02).abs() < 1e-15);
            }
        }
        let straight = rope_centerline(Vec3::zeros(), 0.0, 0.5, 26, 0.0);
        assert!((straight[25] - Vec3::new(0.5, 0.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn straight_to_straight_is_static() {
        let b = generate_rope_scene(&rope_cfg(RopeShape::Straight, RopeShape::Straight, false)).unwrap();
        for t in 1..21 {
            assert_eq!(b.gt_flow.frame(t), b.gt_flow.frame(0));
        }
    }

    #[test]
    fn pinned_end_stays_put_and_arc_length_holds() {
        let b = generate_rope_scene(&rope_cfg(RopeShape::UShape, RopeShape::Straight, true)).unwrap();
        let f = &b.gt_flow;
        let arc = |t: usize| f.frame(t).windows(2).map(|w| (w[1] - w[0]).norm()).sum::<f64>();
        let l0 = arc(0);
        for t in 0..f.frames {
            assert!((f.position(t, 0) - f.position(0, 0)).norm() < 1e-12);
            assert!((arc(t) - l0).abs() < 0.02 * l0);
        }
        let spec = b.dynamics.unwrap();
        assert_eq!(spec.fixed, vec![0]);
        assert_eq!(spec.attachment, vec![25]);
    }

    #[test]
    fn curl_past_a_full_turn_self_intersects() {
        let cfg = rope_cfg(RopeShape::Straight, RopeShape::Arc { turn: 2.3 * std::f64::consts::PI }, true);
        let err = generate_rope_scene(&cfg).unwrap_err();
        assert!(err.to_string().contains("self-intersecting"), "{err}");
    }

    #[test]
    fn mirrored_fixture_reverses_the_rope() {
        let b = generate_rope_scene(&SceneConfig::mirrored_rope(0)).unwrap();
        let fx = b.fixture.unwrap();
        let f = &b.gt_flow;
        let last = f.frames - 1;
        // the rope ends turned half a revolution about the pin
        let n = f.keypoints;
        let c = f.position(0, fx.pivot);
        for i in 0..n {
            let p = f.position(0, i) - c;
            let want = c + Vec3::new(-p.x, -p.y, p.z);
            let d = (f.position(last, i) - want).norm();
            assert!(d < 0.01, "particle {i} off by {d}");
        }
        assert_eq!(b.dynamics.unwrap().fixed, vec![fx.pivot]);
        // no one-step move beats standing still by much
        assert!(fx.grid_best_chamfer > 0.5 * fx.zero_step_chamfer, "{fx:?}");
        // Chamfer barely sees the difference; the correspondence cost does
        assert!(fx.chamfer_start * (n as f64) < 0.1 * fx.flow_cost_start, "{fx:?}");
    }
}
