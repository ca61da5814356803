use nalgebra::{Matrix3, Vector3};

use super::RigidError;
use crate::geometry::{centroid, SE3Pose, Vec3};

/// Relative eigenvalue threshold below which the source scatter is treated
/// as rank-deficient.
const RANK_TOL: f64 = 1e-12;

/// Least-squares rigid transform mapping `source[i]` onto `target[i]`.
///
/// Rotation from the SVD of the centred cross-covariance with the
/// determinant sign folded into the smallest singular direction, so the
/// result is always a proper rotation. Translation is `c_t - R c_s`.
pub fn estimate_rigid_transform(source: &[Vec3], target: &[Vec3]) -> Result<SE3Pose, RigidError> {
    if source.len() != target.len() {
        return Err(RigidError::LengthMismatch {
            source_len: source.len(),
            target_len: target.len(),
        });
    }
    if source.len() < 3 {
        return Err(RigidError::Underdetermined(source.len()));
    }
    let cs = centroid(source);
    let ct = centroid(target);

    let mut h = Matrix3::zeros();
    for (s, t) in source.iter().zip(target) {
        h += (s - cs) * (t - ct).transpose();
    }

    // Collinear (or coincident) sources leave a rotation about the line
    // unobservable; check the source scatter, not H, since H also degenerates
    // when the target collapses.
    let mut scatter = Matrix3::zeros();
    for s in source {
        let d = s - cs;
        scatter += d * d.transpose();
    }
    let sv = scatter.symmetric_eigenvalues();
    let mut sv: Vec<f64> = sv.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    if !(sv[0] > 0.0) || sv[1] <= RANK_TOL * sv[0] {
        return Err(RigidError::Degenerate);
    }

    let svd = h.svd(true, true);
    let u = svd.u.ok_or(RigidError::Degenerate)?;
    let vt = svd.v_t.ok_or(RigidError::Degenerate)?;
    let v = vt.transpose();
    let d = (v * u.transpose()).determinant().signum();
    let d = if d == 0.0 { 1.0 } else { d };
    let rotation = v * Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d)) * u.transpose();
    Ok(SE3Pose {
        rotation,
        translation: ct - rotation * cs,
    })
}

/// Sum of squared alignment errors `Σ ‖R s_i + t − t_i‖²`.
pub fn alignment_residual(pose: &SE3Pose, source: &[Vec3], target: &[Vec3]) -> f64 {
    source
        .iter()
        .zip(target)
        .map(|(s, t)| (pose.transform_point(s) - t).norm_squared())
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_points(rng: &mut impl Rng, n: usize) -> Vec<Vec3> {
        (0..n)
            .map(|_| {
                Vec3::new(
                    rng.random_range(0.0..1.0),
                    rng.random_range(0.0..1.0),
                    rng.random_range(0.0..1.0),
                )
            })
            .collect()
    }

    fn random_pose(rng: &mut impl Rng) -> SE3Pose {
        let axis = Vec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let mut p = SE3Pose::from_axis_angle(&axis, rng.random_range(-3.1..3.1));
        p.translation = Vec3::new(
            rng.random_range(-2.0..2.0),
            rng.random_range(-2.0..2.0),
            rng.random_range(-2.0..2.0),
        );
        p
    }

    #[test]
    fn identity_and_translation() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let src = random_points(&mut rng, 10);
        let id = estimate_rigid_transform(&src, &src).unwrap();
        assert!((id.rotation - Matrix3::identity()).norm() < 1e-12);
        assert!(id.translation.norm() < 1e-12);
        let off = Vec3::new(0.0, 0.0, 0.1);
        let tgt: Vec<Vec3> = src.iter().map(|p| p + off).collect();
        let tr = estimate_rigid_transform(&src, &tgt).unwrap();
        assert!((tr.rotation - Matrix3::identity()).norm() < 1e-12);
        assert!((tr.translation - off).norm() < 1e-12);
    }

    #[test]
    fn recovers_random_transforms() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..1000 {
            let src = random_points(&mut rng, 50);
            let truth = random_pose(&mut rng);
            let tgt: Vec<Vec3> = src.iter().map(|p| truth.transform_point(p)).collect();
            let est = estimate_rigid_transform(&src, &tgt).unwrap();
            assert!((est.rotation - truth.rotation).norm() < 1e-9);
            assert!((est.translation - truth.translation).norm() < 1e-9);
        }
    }

    #[test]
    fn mirrored_input_gives_proper_rotation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let src: Vec<Vec3> = (0..8)
            .map(|_| {
                Vec3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-0.01..0.01),
                )
            })
            .collect();
        let tgt: Vec<Vec3> = src.iter().map(|p| Vec3::new(-p.x, p.y, p.z)).collect();
        let est = estimate_rigid_transform(&src, &tgt).unwrap();
        assert!((est.rotation.determinant() - 1.0).abs() < 1e-12);
        assert!(alignment_residual(&est, &src, &tgt) > 0.0);
    }

    #[test]
    fn degenerate_inputs() {
        let line: Vec<Vec3> = (0..5).map(|i| Vec3::new(i as f64, 0.0, 0.0)).collect();
        let err = estimate_rigid_transform(&line, &line).unwrap_err();
        assert!(err.to_string().contains("degenerate configuration"));
        let two = &line[..2];
        assert!(estimate_rigid_transform(two, two)
            .unwrap_err()
            .to_string()
            .contains("underdetermined"));
        let same = vec![Vec3::new(1.0, 2.0, 3.0); 4];
        assert!(estimate_rigid_transform(&same, &same).is_err());
    }

    #[test]
    fn planar_points_are_fine() {
        let src = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
        ];
        let rot = SE3Pose::from_axis_angle(&Vec3::new(1.0, 1.0, 0.0), 0.7);
        let tgt: Vec<Vec3> = src.iter().map(|p| rot.transform_point(p)).collect();
        let est = estimate_rigid_transform(&src, &tgt).unwrap();
        assert!((est.rotation - rot.rotation).norm() < 1e-12);
    }
}
