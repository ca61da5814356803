use nalgebra::{DMatrix, DVector, Matrix6xX, Vector6};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{JointConfig, KinematicsError, RobotModel};
use crate::geometry::{so3_log, SE3Pose};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IkOptions {
    pub max_iters: usize,
    pub pos_tol: f64,
    pub rot_tol: f64,
    pub damping: f64,
    pub restarts: usize,
    pub seed: u64,
    /// Ignore orientation; for arms with fewer than six joints.
    pub position_only: bool,
}

impl Default for IkOptions {
    fn default() -> Self {
        Self {
            max_iters: 200,
            pos_tol: 1e-4,
            rot_tol: 1e-3,
            damping: 0.05,
            restarts: 8,
            seed: 0,
            position_only: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IkSolution {
    pub q: JointConfig,
    pub position_error: f64,
    pub rotation_error: f64,
    pub iterations: usize,
    pub restarts_used: usize,
}

fn pose_error(
    model: &RobotModel,
    q: &JointConfig,
    target: &SE3Pose,
) -> Result<Vector6<f64>, KinematicsError> {
    let ee = model.ee_pose(q)?;
    let ep = target.translation - ee.translation;
    let er = so3_log(&(target.rotation * ee.rotation.transpose()));
    Ok(Vector6::new(ep.x, ep.y, ep.z, er.x, er.y, er.z))
}

fn error_norm(e: &Vector6<f64>, position_only: bool) -> f64 {
    if position_only {
        e.fixed_rows::<3>(0).norm()
    } else {
        e.norm()
    }
}

fn within_tol(e: &Vector6<f64>, opts: &IkOptions) -> bool {
    e.fixed_rows::<3>(0).norm() <= opts.pos_tol
        && (opts.position_only || e.fixed_rows::<3>(3).norm() <= opts.rot_tol)
}

/// Damped least squares from one starting point. Returns the final
/// configuration, its error, and the iteration count.
fn dls(
    model: &RobotModel,
    target: &SE3Pose,
    start: JointConfig,
    opts: &IkOptions,
) -> Result<(JointConfig, Vector6<f64>, usize), KinematicsError> {
    let mut q = start;
    model.clamp(&mut q);
    let mut err = pose_error(model, &q, target)?;
    let mut lambda = opts.damping;
    let rows = if opts.position_only { 3 } else { 6 };
    for it in 0..opts.max_iters {
        if within_tol(&err, opts) {
            return Ok((q, err, it));
        }
        let full: Matrix6xX<f64> = model.jacobian(&q)?;
        let j = full.rows(0, rows).into_owned();
        let e = DVector::from_iterator(rows, err.iter().take(rows).copied());
        let jjt = &j * j.transpose() + DMatrix::identity(rows, rows) * (lambda * lambda);
        let Some(chol) = jjt.cholesky() else {
            lambda *= 2.0;
            continue;
        };
        let dq = j.transpose() * chol.solve(&e);
        let mut cand = &q + dq;
        model.clamp(&mut cand);
        let cand_err = pose_error(model, &cand, target)?;
        if error_norm(&cand_err, opts.position_only) < error_norm(&err, opts.position_only) {
            q = cand;
            err = cand_err;
            lambda = (lambda * 0.5).max(1e-6);
        } else {
            lambda *= 2.0;
            if lambda > 1e3 {
                break;
            }
        }
    }
    let iters = opts.max_iters;
    Ok((q, err, iters))
}

/// Damped-least-squares IK with joint clamping every step and seeded random
/// restarts. The seed configuration is tried first.
pub fn solve_ik(
    model: &RobotModel,
    target: &SE3Pose,
    seed: &JointConfig,
    opts: &IkOptions,
) -> Result<IkSolution, KinematicsError> {
    if seed.len() != model.dof() {
        return Err(KinematicsError::SizeMismatch {
            expected: model.dof(),
            got: seed.len(),
        });
    }
    if !target
        .rotation
        .iter()
        .chain(target.translation.iter())
        .all(|v| v.is_finite())
    {
        return Err(KinematicsError::InvalidModel(
            "target pose is not finite".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut best: Option<(f64, JointConfig)> = None;
    for attempt in 0..=opts.restarts {
        let start = if attempt == 0 {
            seed.clone()
        } else {
            DVector::from_iterator(
                model.dof(),
                model
                    .joints
                    .iter()
                    .map(|j| rng.random_range(j.q_min..=j.q_max)),
            )
        };
        let (q, err, iterations) = dls(model, target, start, opts)?;
        if within_tol(&err, opts) {
            return Ok(IkSolution {
                q,
                position_error: err.fixed_rows::<3>(0).norm(),
                rotation_error: err.fixed_rows::<3>(3).norm(),
                iterations,
                restarts_used: attempt,
            });
        }
        let n = error_norm(&err, opts.position_only);
        if best.as_ref().is_none_or(|(b, _)| n < *b) {
            best = Some((n, q));
        }
    }
    let residual = best.map(|(n, _)| n).unwrap_or(f64::INFINITY);
    Err(KinematicsError::Unreachable { residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec3;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn fixed_point_returns_seed() {
        let arm = RobotModel::panda_fixture();
        let seed = arm.home.clone().unwrap();
        let target = arm.ee_pose(&seed).unwrap();
        let sol = solve_ik(&arm, &target, &seed, &IkOptions::default()).unwrap();
        assert_eq!(sol.q, seed);
        assert_eq!(sol.iterations, 0);
    }

    #[test]
    fn planar_matches_closed_form() {
        let arm = RobotModel::planar_two_link();
        // oracle: law of cosines gives elbow angle ±90°; orientation of the
        // target picks the elbow-up branch q = (0, 90°)
        let (l1, l2, x, y) = (1.0f64, 1.0f64, 1.0f64, 1.0f64);
        let c2 = (x * x + y * y - l1 * l1 - l2 * l2) / (2.0 * l1 * l2);
        let q2 = c2.acos();
        let q1 = y.atan2(x) - (l2 * q2.sin()).atan2(l1 + l2 * q2.cos());
        let target = SE3Pose::new(
            SE3Pose::from_axis_angle(&Vec3::z(), q1 + q2).rotation,
            Vec3::new(x, y, 0.0),
        );
        let opts = IkOptions {
            pos_tol: 1e-9,
            rot_tol: 1e-9,
            ..Default::default()
        };
        let sol = solve_ik(&arm, &target, &DVector::from_row_slice(&[0.3, 0.5]), &opts).unwrap();
        assert!(
            (sol.q[0] - q1).abs() < 1e-6 && (sol.q[1] - q2).abs() < 1e-6,
            "{:?}",
            sol.q
        );
        assert!((q2 - FRAC_PI_2).abs() < 1e-12);
        let ee = arm.ee_pose(&sol.q).unwrap();
        assert!((ee.translation - target.translation).norm() <= 1e-6);
    }

    #[test]
    fn unreachable_target() {
        let arm = RobotModel::planar_two_link();
        let target = SE3Pose::from_translation(Vec3::new(3.0, 0.0, 0.0));
        let opts = IkOptions {
            position_only: true,
            ..Default::default()
        };
        let err = solve_ik(&arm, &target, &DVector::zeros(2), &opts).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("IK unreachable"), "{msg}");
        assert!(
            matches!(err, KinematicsError::Unreachable { residual } if (residual - 1.0).abs() < 1e-3)
        );
    }

    #[test]
    fn panda_round_trip_within_tolerances_and_limits() {
        let arm = RobotModel::panda_fixture();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let home = arm.home.clone().unwrap();
        let opts = IkOptions::default();
        for _ in 0..30 {
            // targets near the home pose, reachable by construction
            let q_true = DVector::from_iterator(
                7,
                home.iter()
                    .zip(&arm.joints)
                    .map(|(h, j)| (h + rng.random_range(-0.4..0.4)).clamp(j.q_min, j.q_max)),
            );
            let target = arm.ee_pose(&q_true).unwrap();
            let sol = solve_ik(&arm, &target, &home, &opts).unwrap();
            // audit with an independent FK evaluation, not the solver's report
            let ee = arm.ee_pose(&sol.q).unwrap();
            assert!(ee.translation_distance(&target) <= opts.pos_tol);
            assert!(ee.rotation_distance(&target) <= opts.rot_tol);
            assert!(arm.within_limits(&sol.q));
        }
    }
}
