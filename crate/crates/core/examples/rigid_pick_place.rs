//! Pick-lift-place: simulate, distill, plan with the Panda fixture, evaluate.

use std::time::Instant;

use nvflow::kinematics::RobotModel;
use nvflow::pipeline::{plan_rigid, RigidPlanConfig};
use nvflow::sim::{distill_bundle, evaluate_rigid, generate_scene, SceneConfig, Thresholds};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed = std::env::args().nth(1).map_or(Ok(0), |s| s.parse())?;
    let start = Instant::now();
    let scene = SceneConfig::pick_lift_place(seed);
    let bundle = generate_scene(&scene)?;
    let (flow, scale) = distill_bundle(&bundle)?;
    println!("{} keypoints over {} frames, depth scale {scale:.4}", flow.keypoints, flow.frames);
    let plan = plan_rigid(
        &flow,
        Some(&bundle.camera_pose),
        &RobotModel::panda_fixture(),
        &scene.obstacles,
        &RigidPlanConfig::default(),
    )?;
    let r = &plan.trajopt;
    println!(
        "trajopt: {} steps, {} iterations, cost {:.4} -> {:.4}, min clearance {:?}, converged {}",
        r.trajectory.len(),
        r.iterations,
        r.initial_cost,
        r.final_cost,
        r.min_clearance,
        r.converged
    );
    let gt = bundle.gt_poses.as_ref().ok_or("rigid scene without poses")?;
    let m = evaluate_rigid(&plan.executed, gt, &Thresholds::default())?;
    println!(
        "final error {:.3} deg, {:.3} mm, success {} ({:.1}s)",
        m.rotation_error_deg.last().copied().unwrap_or(0.0),
        m.translation_error_mm.last().copied().unwrap_or(0.0),
        m.success,
        start.elapsed().as_secs_f64()
    );
    Ok(())
}
