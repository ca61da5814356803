use std::path::Path;

use nalgebra::{DVector, Matrix6xX};
use serde::{Deserialize, Serialize};

use super::KinematicsError;
use crate::geometry::{so3_exp, SE3Pose, Vec3};

pub type JointConfig = DVector<f64>;

#[derive(Clone, Debug, PartialEq)]
pub struct Joint {
    pub name: String,
    pub axis: Vec3,
    pub origin: SE3Pose,
    pub q_min: f64,
    pub q_max: f64,
    pub velocity_limit: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CollisionSphere {
    /// 0 is the base frame, `j` the frame after joint `j`.
    pub link: usize,
    pub center: Vec3,
    pub radius: f64,
}

/// Serial chain of revolute joints with per-link collision spheres.
#[derive(Clone, Debug, PartialEq)]
pub struct RobotModel {
    pub joints: Vec<Joint>,
    pub ee_offset: SE3Pose,
    pub spheres: Vec<CollisionSphere>,
    pub home: Option<JointConfig>,
}

#[derive(Serialize, Deserialize)]
struct OriginJson {
    #[serde(default)]
    xyz: [f64; 3],
    #[serde(default)]
    rpy: [f64; 3],
}

#[derive(Serialize, Deserialize)]
struct JointJson {
    name: String,
    axis: [f64; 3],
    origin: OriginJson,
    q_min: f64,
    q_max: f64,
    velocity_limit: f64,
}

#[derive(Serialize, Deserialize)]
struct SphereJson {
    link: usize,
    center: [f64; 3],
    radius: f64,
}

#[derive(Serialize, Deserialize)]
struct RobotJson {
    joints: Vec<JointJson>,
    ee_offset: OriginJson,
    spheres: Vec<SphereJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    home: Option<Vec<f64>>,
}

fn origin_pose(o: &OriginJson) -> SE3Pose {
    SE3Pose::from_xyz_rpy(Vec3::from(o.xyz), Vec3::from(o.rpy))
}

const PANDA_JSON: &str = include_str!("../../fixtures/panda7.json");

impl RobotModel {
    pub fn new(
        joints: Vec<Joint>,
        ee_offset: SE3Pose,
        spheres: Vec<CollisionSphere>,
        home: Option<JointConfig>,
    ) -> Result<Self, KinematicsError> {
        let m = Self {
            joints,
            ee_offset,
            spheres,
            home,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), KinematicsError> {
        let bad = |s: String| Err(KinematicsError::InvalidModel(s));
        if self.joints.is_empty() {
            return bad("no joints".into());
        }
        for j in &self.joints {
            if !(j.q_min < j.q_max) {
                return bad(format!("joint '{}': q_min must be below q_max", j.name));
            }
            if (j.axis.norm() - 1.0).abs() > 1e-9 {
                return bad(format!("joint '{}': axis is not unit length", j.name));
            }
            if !(j.velocity_limit > 0.0) {
                return bad(format!(
                    "joint '{}': velocity limit must be positive",
                    j.name
                ));
            }
        }
        if self.spheres.is_empty() {
            return bad("at least one collision sphere is required".into());
        }
        for s in &self.spheres {
            if s.link > self.joints.len() || !(s.radius > 0.0) {
                return bad(format!("bad collision sphere on link {}", s.link));
            }
        }
        if let Some(h) = &self.home {
            self.check_len(h)?;
        }
        Ok(())
    }

    pub fn dof(&self) -> usize {
        self.joints.len()
    }

    pub fn lower_limits(&self) -> JointConfig {
        DVector::from_iterator(self.dof(), self.joints.iter().map(|j| j.q_min))
    }

    pub fn upper_limits(&self) -> JointConfig {
        DVector::from_iterator(self.dof(), self.joints.iter().map(|j| j.q_max))
    }

    pub fn within_limits(&self, q: &JointConfig) -> bool {
        q.len() == self.dof()
            && self
                .joints
                .iter()
                .zip(q.iter())
                .all(|(j, &v)| v >= j.q_min && v <= j.q_max)
    }

    pub fn clamp(&self, q: &mut JointConfig) {
        for (j, v) in self.joints.iter().zip(q.iter_mut()) {
            *v = v.clamp(j.q_min, j.q_max);
        }
    }

    /// Home configuration, or the middle of the joint ranges.
    pub fn home_or_mid(&self) -> JointConfig {
        self.home
            .clone()
            .unwrap_or_else(|| (self.lower_limits() + self.upper_limits()) * 0.5)
    }

    fn check_len(&self, q: &JointConfig) -> Result<(), KinematicsError> {
        if q.len() != self.dof() {
            return Err(KinematicsError::SizeMismatch {
                expected: self.dof(),
                got: q.len(),
            });
        }
        Ok(())
    }

    /// Link frames (base first, `dof + 1` entries) and the end-effector pose.
    pub fn forward_kinematics(
        &self,
        q: &JointConfig,
    ) -> Result<(SE3Pose, Vec<SE3Pose>), KinematicsError> {
        self.check_len(q)?;
        let mut links = Vec::with_capacity(self.dof() + 1);
        let mut cur = SE3Pose::identity();
        links.push(cur);
        for (j, &qj) in self.joints.iter().zip(q.iter()) {
            cur = cur.compose(&j.origin);
            cur.rotation *= so3_exp(&(j.axis * qj));
            links.push(cur);
        }
        Ok((cur.compose(&self.ee_offset), links))
    }

    pub fn ee_pose(&self, q: &JointConfig) -> Result<SE3Pose, KinematicsError> {
        Ok(self.forward_kinematics(q)?.0)
    }

    /// World positions of every collision sphere centre, in model order.
    pub fn sphere_centers(&self, q: &JointConfig) -> Result<Vec<Vec3>, KinematicsError> {
        let (_, links) = self.forward_kinematics(q)?;
        Ok(self
            .spheres
            .iter()
            .map(|s| links[s.link].transform_point(&s.center))
            .collect())
    }

    /// Geometric Jacobian at the end-effector origin; rows 0..3 linear, 3..6
    /// angular.
    pub fn jacobian(&self, q: &JointConfig) -> Result<Matrix6xX<f64>, KinematicsError> {
        let (ee, links) = self.forward_kinematics(q)?;
        let mut jac = Matrix6xX::zeros(self.dof());
        for (j, joint) in self.joints.iter().enumerate() {
            let frame = &links[j + 1];
            let axis = frame.rotation * joint.axis;
            let lin = axis.cross(&(ee.translation - frame.translation));
            jac.fixed_view_mut::<3, 1>(0, j).copy_from(&lin);
            jac.fixed_view_mut::<3, 1>(3, j).copy_from(&axis);
        }
        Ok(jac)
    }

    pub fn from_json_str(text: &str) -> Result<Self, KinematicsError> {
        let raw: RobotJson =
            serde_json::from_str(text).map_err(|e| KinematicsError::InvalidModel(e.to_string()))?;
        let joints = raw
            .joints
            .iter()
            .map(|j| {
                let axis = Vec3::from(j.axis);
                Joint {
                    name: j.name.clone(),
                    axis: if axis.norm() > 0.0 {
                        axis.normalize()
                    } else {
                        axis
                    },
                    origin: origin_pose(&j.origin),
                    q_min: j.q_min,
                    q_max: j.q_max,
                    velocity_limit: j.velocity_limit,
                }
            })
            .collect();
        let spheres = raw
            .spheres
            .iter()
            .map(|s| CollisionSphere {
                link: s.link,
                center: Vec3::from(s.center),
                radius: s.radius,
            })
            .collect();
        Self::new(
            joints,
            origin_pose(&raw.ee_offset),
            spheres,
            raw.home.map(DVector::from_vec),
        )
    }

    pub fn load(path: &Path) -> Result<Self, KinematicsError> {
        let text = std::fs::read_to_string(path).map_err(|e| KinematicsError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::from_json_str(&text)
    }

    /// Seven-joint arm with Panda-like geometry and limits. Fixture data, not
    /// a calibrated model.
    pub fn panda_fixture() -> Self {
        Self::from_json_str(PANDA_JSON).expect("bundled robot fixture is valid")
    }

    pub fn panda_fixture_json() -> &'static str {
        PANDA_JSON
    }

    /// Two unit links rotating about z; a sphere of radius 0.05 at the tip.
    pub fn planar_two_link() -> Self {
        let z = Vec3::z();
        let joint = |name: &str, x: f64| Joint {
            name: name.into(),
            axis: z,
            origin: SE3Pose::from_translation(Vec3::new(x, 0.0, 0.0)),
            q_min: -std::f64::consts::PI,
            q_max: std::f64::consts::PI,
            velocity_limit: 2.0,
        };
        Self::new(
            vec![joint("shoulder", 0.0), joint("elbow", 1.0)],
            SE3Pose::from_translation(Vec3::new(1.0, 0.0, 0.0)),
            vec![CollisionSphere {
                link: 2,
                center: Vec3::new(1.0, 0.0, 0.0),
                radius: 0.05,
            }],
            None,
        )
        .expect("valid planar arm")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_PI_2;

    fn q(v: &[f64]) -> JointConfig {
        DVector::from_row_slice(v)
    }

    #[test]
    fn planar_fk() {
        let arm = RobotModel::planar_two_link();
        let ee = arm.ee_pose(&q(&[0.0, 0.0])).unwrap();
        assert!((ee.translation - Vec3::new(2.0, 0.0, 0.0)).norm() < 1e-15);
        let ee = arm.ee_pose(&q(&[FRAC_PI_2, 0.0])).unwrap();
        assert!((ee.translation - Vec3::new(0.0, 2.0, 0.0)).norm() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let c = q(&[rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)]);
            assert!(arm.ee_pose(&c).unwrap().translation.norm() <= 2.0 + 1e-12);
        }
        assert!(matches!(
            arm.ee_pose(&q(&[0.0])),
            Err(KinematicsError::SizeMismatch {
                expected: 2,
                got: 1
            })
        ));
    }

    #[test]
    fn single_joint_jacobian() {
        let arm = RobotModel::new(
            vec![Joint {
                name: "j".into(),
                axis: Vec3::z(),
                origin: SE3Pose::identity(),
                q_min: -1.0,
                q_max: 1.0,
                velocity_limit: 1.0,
            }],
            SE3Pose::from_translation(Vec3::x()),
            vec![CollisionSphere {
                link: 1,
                center: Vec3::zeros(),
                radius: 0.1,
            }],
            None,
        )
        .unwrap();
        let j = arm.jacobian(&q(&[0.0])).unwrap();
        let col: Vec<f64> = j.column(0).iter().copied().collect();
        assert_eq!(col, vec![0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn jacobian_matches_central_differences() {
        let arm = RobotModel::panda_fixture();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h = 1e-6;
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            let c = DVector::from_iterator(
                7,
                arm.joints
                    .iter()
                    .map(|j| rng.random_range(j.q_min..j.q_max)),
            );
            let jac = arm.jacobian(&c).unwrap();
            let ee = arm.ee_pose(&c).unwrap();
            for k in 0..7 {
                let mut plus = c.clone();
                plus[k] += h;
                let mut minus = c.clone();
                minus[k] -= h;
                let (ep, em) = (arm.ee_pose(&plus).unwrap(), arm.ee_pose(&minus).unwrap());
                let dp = (ep.translation - em.translation) / (2.0 * h);
                // angular velocity from the rotation change, expressed in world
                let dw =
                    crate::geometry::so3_log(&(ep.rotation * em.rotation.transpose())) / (2.0 * h);
                for r in 0..3 {
                    worst = worst.max((dp[r] - jac[(r, k)]).abs());
                    worst = worst.max((dw[r] - jac[(r + 3, k)]).abs());
                }
            }
            assert!(ee.is_valid(1e-9));
        }
        assert!(worst < 1e-5, "max deviation {worst}");
    }

    #[test]
    fn joint_through_ee_has_zero_linear_column() {
        // second joint sits at the end effector, so its lever arm is zero
        let mut arm = RobotModel::planar_two_link();
        arm.ee_offset = SE3Pose::identity();
        let j = arm.jacobian(&q(&[0.3, -0.2])).unwrap();
        assert!(j.fixed_view::<3, 1>(0, 1).norm() < 1e-15);
    }

    #[test]
    fn fk_is_deterministic() {
        let arm = RobotModel::panda_fixture();
        let c = arm.home_or_mid();
        assert_eq!(
            arm.forward_kinematics(&c).unwrap(),
            arm.forward_kinematics(&c).unwrap()
        );
    }

    #[test]
    fn panda_fixture_home_pose_points_down() {
        let arm = RobotModel::panda_fixture();
        let ee = arm.ee_pose(arm.home.as_ref().unwrap()).unwrap();
        assert!(
            (ee.translation - Vec3::new(0.307, 0.0, 0.48)).norm() < 0.02,
            "{:?}",
            ee.translation
        );
        assert!((ee.rotation.column(2).z + 1.0).abs() < 1e-3);
    }

    #[test]
    fn invalid_models_rejected() {
        let text = RobotModel::panda_fixture_json().replace("\"q_min\": -2.8973", "\"q_min\": 3.0");
        let err = RobotModel::from_json_str(&text).unwrap_err();
        assert!(err.to_string().contains("q_min"), "{err}");
        let mut arm = RobotModel::planar_two_link();
        arm.spheres.clear();
        assert!(arm.validate().is_err());
    }
}
