use super::DeformableError;
use crate::geometry::Vec3;

/// `Σ_i ‖s_i − f_{corr(i)}‖²`.
pub fn flow_cost(
    particles: &[Vec3],
    flow_frame: &[Vec3],
    correspondence: &[usize],
) -> Result<f64, DeformableError> {
    if particles.len() != correspondence.len() {
        return Err(DeformableError::SizeMismatch {
            expected: particles.len(),
            got: correspondence.len(),
        });
    }
    let mut c = 0.0;
    for (p, &k) in particles.iter().zip(correspondence) {
        let f = flow_frame.get(k).ok_or(DeformableError::SizeMismatch {
            expected: k + 1,
            got: flow_frame.len(),
        })?;
        c += (p - f).norm_squared();
    }
    Ok(c)
}

fn mean_nearest(from: &[Vec3], to: &[Vec3]) -> f64 {
    from.iter()
        .map(|p| {
            to.iter()
                .map(|q| (p - q).norm_squared())
                .fold(f64::INFINITY, f64::min)
        })
        .sum::<f64>()
        / from.len() as f64
}

/// Symmetric Chamfer distance with squared nearest-neighbour terms.
pub fn chamfer_cost(particles: &[Vec3], goal: &[Vec3]) -> Result<f64, DeformableError> {
    if goal.is_empty() || particles.is_empty() {
        return Err(DeformableError::EmptyGoal);
    }
    Ok(mean_nearest(particles, goal) + mean_nearest(goal, particles))
}

/// Nearest frame-0 keypoint for every particle (ties to the lower index),
/// and the summed assignment distance.
pub fn build_correspondence(keypoints: &[Vec3], particles: &[Vec3]) -> (Vec<usize>, f64) {
    let mut total = 0.0;
    let corr = particles
        .iter()
        .map(|p| {
            let mut best = (0, f64::INFINITY);
            for (k, f) in keypoints.iter().enumerate() {
                let d = (p - f).norm_squared();
                if d < best.1 {
                    best = (k, d);
                }
            }
            total += best.1.sqrt();
            best.0
        })
        .collect();
    (corr, total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{seq::SliceRandom, Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cloud(rng: &mut impl Rng, n: usize) -> Vec<Vec3> {
        (0..n)
            .map(|_| {
                Vec3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                )
            })
            .collect()
    }

    #[test]
    fn flow_cost_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts = cloud(&mut rng, 10);
        let id: Vec<usize> = (0..10).collect();
        assert_eq!(flow_cost(&pts, &pts, &id).unwrap(), 0.0);
        let mut moved = pts.clone();
        moved[3].x += 0.1;
        assert!((flow_cost(&moved, &pts, &id).unwrap() - 0.01).abs() < 1e-15);
        let other = cloud(&mut rng, 10);
        let brute: f64 = pts.iter().zip(&other).map(|(p, o)| (p - o).norm_squared()).sum();
        assert!((flow_cost(&pts, &other, &id).unwrap() - brute).abs() < 1e-12);
        assert!(flow_cost(&pts, &other, &id[..5]).is_err());
    }

    #[test]
    fn chamfer_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pts = cloud(&mut rng, 12);
        assert_eq!(chamfer_cost(&pts, &pts).unwrap(), 0.0);
        let mut perm = pts.clone();
        perm.shuffle(&mut rng);
        assert_eq!(chamfer_cost(&perm, &pts).unwrap(), 0.0);
        let two = [Vec3::zeros(), Vec3::x()];
        assert!((chamfer_cost(&two, &[Vec3::zeros()]).unwrap() - 0.5).abs() < 1e-15);
        assert!(chamfer_cost(&two, &[]).is_err());
    }

    #[test]
    fn permutation_separates_the_costs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts = cloud(&mut rng, 8);
        let mut perm = pts.clone();
        perm.reverse();
        let id: Vec<usize> = (0..8).collect();
        assert_eq!(chamfer_cost(&perm, &pts).unwrap(), 0.0);
        assert!(flow_cost(&perm, &pts, &id).unwrap() > 0.1);
    }

    #[test]
    fn correspondence_rules() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let kp: Vec<Vec3> = (0..10)
            .map(|i| Vec3::new(i as f64 * 0.05, 0.0, 0.0))
            .collect();
        let (corr, d) = build_correspondence(&kp, &kp);
        assert_eq!(corr, (0..10).collect::<Vec<_>>());
        assert_eq!(d, 0.0);
        let noisy: Vec<Vec3> = kp
            .iter()
            .map(|p| p + cloud(&mut rng, 1)[0] * 0.001)
            .collect();
        assert_eq!(
            build_correspondence(&kp, &noisy).0,
            (0..10).collect::<Vec<_>>()
        );
        let (tie, _) = build_correspondence(
            &[Vec3::zeros(), Vec3::new(0.5, 0.0, 0.0)],
            &[Vec3::new(0.25, 0.0, 0.0)],
        );
        assert_eq!(tie, vec![0]);
    }
}
