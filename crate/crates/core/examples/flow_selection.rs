//! Scores a clean distilled flow against corrupted copies and picks one.

use nvflow::pipeline::{select_flow, DistillConfig};
use nvflow::sim::{distill_bundle, generate_scene, SceneConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let bundle = generate_scene(&SceneConfig::pick_lift_place(0))?;
    let (clean, _) = distill_bundle(&bundle)?;
    let config = DistillConfig {
        candidates: 8,
        ..DistillConfig::default()
    };
    let (candidates, chosen) = select_flow(&clean, &bundle.intrinsics, &config, 0)?;
    for c in &candidates {
        let sigma = if c.id == 0 { 0.0 } else { config.noise_ladder[(c.id as usize - 1) % config.noise_ladder.len()] };
        println!("candidate {} sigma {sigma:.2} m score {:.2}", c.id, c.score);
    }
    println!("selected {chosen}");
    Ok(())
}
