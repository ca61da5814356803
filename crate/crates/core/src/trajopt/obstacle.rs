use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use super::TrajOptError;
use crate::geometry::{SE3Pose, Vec3};
use crate::kinematics::{JointConfig, RobotModel};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Obstacle {
    Sphere {
        center: [f64; 3],
        radius: f64,
    },
    Box {
        center: [f64; 3],
        half_extents: [f64; 3],
        /// Roll, pitch, yaw.
        #[serde(default)]
        rpy: [f64; 3],
    },
    Halfspace {
        point: [f64; 3],
        /// Outward normal; the solid side is opposite.
        normal: [f64; 3],
    },
}

impl Obstacle {
    pub fn sphere(center: Vec3, radius: f64) -> Self {
        Obstacle::Sphere {
            center: center.into(),
            radius,
        }
    }

    pub fn validate(&self) -> Result<(), TrajOptError> {
        let ok = match self {
            Obstacle::Sphere { radius, .. } => *radius > 0.0,
            Obstacle::Box { half_extents, .. } => half_extents.iter().all(|h| *h > 0.0),
            Obstacle::Halfspace { normal, .. } => (Vec3::from(*normal).norm() - 1.0).abs() < 1e-9,
        };
        if ok {
            Ok(())
        } else {
            Err(TrajOptError::InvalidProblem(format!(
                "invalid obstacle {self:?}"
            )))
        }
    }

    /// Signed distance from a point to the obstacle surface (negative inside).
    pub fn point_distance(&self, p: &Vec3) -> f64 {
        match self {
            Obstacle::Sphere { center, radius } => (p - Vec3::from(*center)).norm() - radius,
            Obstacle::Box {
                center,
                half_extents,
                rpy,
            } => {
                let r: Matrix3<f64> =
                    SE3Pose::from_xyz_rpy(Vec3::zeros(), Vec3::from(*rpy)).rotation;
                let local = r.transpose() * (p - Vec3::from(*center));
                let q = local.abs() - Vec3::from(*half_extents);
                let outside = q.map(|v| v.max(0.0)).norm();
                let inside = q.max().min(0.0);
                outside + inside
            }
            Obstacle::Halfspace { point, normal } => {
                (p - Vec3::from(*point)).dot(&Vec3::from(*normal))
            }
        }
    }
}

/// Clearance between the robot's collision spheres and one obstacle at a
/// single configuration.
pub fn config_distance(model: &RobotModel, q: &JointConfig, obstacle: &Obstacle) -> f64 {
    sphere_clearance(
        model,
        &model
            .sphere_centers(q)
            .expect("config length checked by caller"),
        obstacle,
    )
}

pub(crate) fn sphere_clearance(model: &RobotModel, centers: &[Vec3], obstacle: &Obstacle) -> f64 {
    centers
        .iter()
        .zip(&model.spheres)
        .map(|(c, s)| obstacle.point_distance(c) - s.radius)
        .fold(f64::INFINITY, f64::min)
}

/// Swept clearance `d_s(q_a, q_b, O)`: the minimum sphere clearance over
/// `samples` evenly spaced configurations on the joint-space segment,
/// endpoints included.
pub fn signed_distance(
    model: &RobotModel,
    q_a: &JointConfig,
    q_b: &JointConfig,
    obstacle: &Obstacle,
    samples: usize,
) -> f64 {
    swept_clearances(model, q_a, q_b, std::slice::from_ref(obstacle), samples)[0]
}

/// Swept clearance against every obstacle, sharing forward kinematics.
pub fn swept_clearances(
    model: &RobotModel,
    q_a: &JointConfig,
    q_b: &JointConfig,
    obstacles: &[Obstacle],
    samples: usize,
) -> Vec<f64> {
    let samples = samples.max(1);
    let mut best = vec![f64::INFINITY; obstacles.len()];
    for k in 0..samples {
        let s = if samples == 1 {
            0.0
        } else {
            k as f64 / (samples - 1) as f64
        };
        let q = q_a + (q_b - q_a) * s;
        let centers = model
            .sphere_centers(&q)
            .expect("config length checked by caller");
        for (b, o) in best.iter_mut().zip(obstacles) {
            *b = b.min(sphere_clearance(model, &centers, o));
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::{CollisionSphere, Joint};
    use nalgebra::DVector;

    fn ball_robot(r: f64) -> RobotModel {
        RobotModel::new(
            vec![Joint {
                name: "j".into(),
                axis: Vec3::z(),
                origin: SE3Pose::identity(),
                q_min: -3.0,
                q_max: 3.0,
                velocity_limit: 1.0,
            }],
            SE3Pose::identity(),
            vec![CollisionSphere {
                link: 1,
                center: Vec3::zeros(),
                radius: r,
            }],
            None,
        )
        .unwrap()
    }

    fn arm_with_tip_sphere() -> RobotModel {
        let mut m = ball_robot(0.05);
        m.spheres[0].center = Vec3::x();
        m
    }

    #[test]
    fn sphere_sphere_distances() {
        let m = ball_robot(0.1);
        let q = DVector::zeros(1);
        let far = Obstacle::sphere(Vec3::new(1.0, 0.0, 0.0), 0.2);
        assert!((signed_distance(&m, &q, &q, &far, 5) - 0.7).abs() < 1e-15);
        let near = Obstacle::sphere(Vec3::new(0.25, 0.0, 0.0), 0.2);
        assert!((signed_distance(&m, &q, &q, &near, 5) + 0.05).abs() < 1e-15);
    }

    #[test]
    fn swept_check_catches_midpoint_collision() {
        let m = arm_with_tip_sphere();
        let deg = std::f64::consts::PI / 180.0;
        let (a, b) = (
            DVector::from_element(1, -30.0 * deg),
            DVector::from_element(1, 30.0 * deg),
        );
        let obs = Obstacle::sphere(Vec3::x(), 0.1);
        // endpoints: tip at (cos 30°, ±sin 30°), distance to obstacle centre
        let end = ((1.0 - (30.0 * deg).cos()).powi(2) + (30.0 * deg).sin().powi(2)).sqrt() - 0.15;
        assert!(end > 0.0);
        assert!((signed_distance(&m, &a, &b, &obs, 2) - end).abs() < 1e-12);
        for s in [3, 5, 9] {
            assert!((signed_distance(&m, &a, &b, &obs, s) + 0.15).abs() < 1e-12);
        }
    }

    #[test]
    fn box_and_halfspace() {
        let bx = Obstacle::Box {
            center: [0.0, 0.0, 0.0],
            half_extents: [1.0, 0.5, 0.25],
            rpy: [0.0, 0.0, 0.0],
        };
        assert!((bx.point_distance(&Vec3::new(2.0, 0.0, 0.0)) - 1.0).abs() < 1e-15);
        assert!((bx.point_distance(&Vec3::new(0.0, 0.0, 0.0)) + 0.25).abs() < 1e-15);
        assert!((bx.point_distance(&Vec3::new(2.0, 1.5, 0.0)) - 2f64.sqrt()).abs() < 1e-15);
        let turned = Obstacle::Box {
            center: [0.0, 0.0, 0.0],
            half_extents: [1.0, 0.5, 0.25],
            rpy: [0.0, 0.0, std::f64::consts::FRAC_PI_2],
        };
        assert!((turned.point_distance(&Vec3::new(0.0, 2.0, 0.0)) - 1.0).abs() < 1e-12);
        let floor = Obstacle::Halfspace {
            point: [0.0, 0.0, 0.0],
            normal: [0.0, 0.0, 1.0],
        };
        assert_eq!(floor.point_distance(&Vec3::new(5.0, 1.0, -0.2)), -0.2);
        assert!(floor.validate().is_ok());
        assert!(Obstacle::sphere(Vec3::zeros(), 0.0).validate().is_err());
    }

    #[test]
    fn obstacle_json_forms() {
        let o: Obstacle =
            serde_json::from_str(r#"{"type":"sphere","center":[0.5,0,0.1],"radius":0.05}"#)
                .unwrap();
        assert_eq!(o, Obstacle::sphere(Vec3::new(0.5, 0.0, 0.1), 0.05));
        let b: Obstacle =
            serde_json::from_str(r#"{"type":"box","center":[0,0,0],"half_extents":[1,1,1]}"#)
                .unwrap();
        assert!(matches!(
            b,
            Obstacle::Box {
                rpy: [0.0, 0.0, 0.0],
                ..
            }
        ));
    }
}
