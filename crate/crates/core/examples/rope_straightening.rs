//! Rope straightening by flow-tracking MPC, from the ground-truth flow and
//! from the distilled one.

use nvflow::deformable::MpcConfig;
use nvflow::pipeline::plan_deformable;
use nvflow::sim::{distill_bundle, generate_scene, SceneConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed = std::env::args().nth(1).map_or(Ok(0), |s| s.parse())?;
    let bundle = generate_scene(&SceneConfig::rope_straightening(seed))?;
    let dynamics = bundle.dynamics.as_ref().ok_or("no dynamics")?;
    let (distilled, _) = distill_bundle(&bundle)?;
    for (name, flow) in [("ground truth", &bundle.gt_flow), ("distilled", &distilled)] {
        let start = std::time::Instant::now();
        let plan = plan_deformable(flow, dynamics, &MpcConfig::default())?;
        let log = &plan.log;
        println!(
            "{name}: {} keypoints, flow cost {:.3e} -> {:.3e} ({:.1}%), {:.1}s",
            flow.keypoints,
            log.initial_cost,
            log.final_cost,
            100.0 * log.final_cost / log.initial_cost,
            start.elapsed().as_secs_f64()
        );
    }
    Ok(())
}
