//! Rigid registration of a noisy point cloud, and what a mirrored target does.

use nvflow::geometry::{rotation_angle, so3_exp, Vec3};
use nvflow::rigid::{alignment_residual, estimate_rigid_transform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let noise = Normal::new(0.0, 0.001)?;
    let src: Vec<Vec3> = (0..50)
        .map(|_| Vec3::new(rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1)))
        .collect();
    let r = so3_exp(&Vec3::new(0.3, -0.5, 1.1));
    let t = Vec3::new(0.4, -0.2, 0.15);
    let tgt: Vec<Vec3> = src
        .iter()
        .map(|p| r * p + t + Vec3::new(noise.sample(&mut rng), noise.sample(&mut rng), noise.sample(&mut rng)))
        .collect();

    let est = estimate_rigid_transform(&src, &tgt)?;
    println!(
        "1 mm noise: rotation error {:.4} deg, translation error {:.3} mm, rms {:.3} mm",
        rotation_angle(&(est.rotation.transpose() * r)).to_degrees(),
        (est.translation - t).norm() * 1000.0,
        (alignment_residual(&est, &src, &tgt) / src.len() as f64).sqrt() * 1000.0
    );

    let mirrored: Vec<Vec3> = tgt.iter().map(|p| Vec3::new(-p.x, p.y, p.z)).collect();
    let est = estimate_rigid_transform(&src, &mirrored)?;
    println!(
        "mirrored target: det(R) = {:.6}, rms {:.1} mm (no proper rotation fits)",
        est.rotation.determinant(),
        (alignment_residual(&est, &src, &mirrored) / src.len() as f64).sqrt() * 1000.0
    );
    Ok(())
}
