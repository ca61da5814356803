//! Flow tracking against Chamfer-to-goal on the mirrored rope fixture.

use nvflow::deformable::{build_correspondence, mpc_rollout, MpcConfig, Objective};
use nvflow::sim::{generate_scene, SceneConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let bundle = generate_scene(&SceneConfig::mirrored_rope(0))?;
    let flow = &bundle.gt_flow;
    let (model, initial) = bundle.dynamics.as_ref().ok_or("no dynamics")?.build()?;
    let (corr, _) = build_correspondence(flow.frame(0), &initial.positions);
    let n = initial.len() as f64;
    for objective in [Objective::Flow, Objective::ChamferToGoal] {
        let start = std::time::Instant::now();
        let config = MpcConfig {
            objective,
            ..MpcConfig::default()
        };
        let log = mpc_rollout(&model, &initial, flow, &config, &corr)?;
        println!(
            "{objective:?}: initial rmse {:.1} mm, final rmse {:.1} mm ({:.1}s)",
            (log.initial_cost / n).sqrt() * 1000.0,
            (log.final_cost / n).sqrt() * 1000.0,
            start.elapsed().as_secs_f64()
        );
    }
    Ok(())
}
