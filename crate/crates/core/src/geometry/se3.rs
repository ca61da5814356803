use nalgebra::{Matrix3, Matrix4, Quaternion, Rotation3, UnitQuaternion, Vector3, Vector6};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::Vec3;

const SMALL_ANGLE: f64 = 1e-9;

/// A rigid transform stored as a 3x3 rotation matrix plus translation.
///
/// Applying the pose to a point computes `R * p + t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SE3Pose {
    pub rotation: Matrix3<f64>,
    pub translation: Vec3,
}

impl Default for SE3Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl SE3Pose {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vec3::zeros(),
        }
    }

    pub fn new(rotation: Matrix3<f64>, translation: Vec3) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn from_translation(translation: Vec3) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation,
        }
    }

    pub fn from_rotation(rotation: Matrix3<f64>) -> Self {
        Self {
            rotation,
            translation: Vec3::zeros(),
        }
    }

    /// Rotation of `angle` radians about `axis` (normalized internally).
    pub fn from_axis_angle(axis: &Vec3, angle: f64) -> Self {
        let n = axis.norm();
        if n == 0.0 {
            return Self::identity();
        }
        Self::from_rotation(so3_exp(&(axis * (angle / n))))
    }

    /// URDF-style roll/pitch/yaw: `Rz(yaw) * Ry(pitch) * Rx(roll)`.
    pub fn from_xyz_rpy(xyz: Vec3, rpy: Vec3) -> Self {
        let r = Rotation3::from_euler_angles(rpy.x, rpy.y, rpy.z);
        Self::new(*r.matrix(), xyz)
    }

    /// Quaternion in `(w, x, y, z)` order; normalized before use.
    pub fn from_quaternion(wxyz: [f64; 4], translation: Vec3) -> Self {
        let q =
            UnitQuaternion::from_quaternion(Quaternion::new(wxyz[0], wxyz[1], wxyz[2], wxyz[3]));
        Self::new(*q.to_rotation_matrix().matrix(), translation)
    }

    pub fn quaternion_wxyz(&self) -> [f64; 4] {
        let r = Rotation3::from_matrix_unchecked(self.rotation);
        let q = UnitQuaternion::from_rotation_matrix(&r);
        let mut out = [q.w, q.i, q.j, q.k];
        // Canonical hemisphere so exports are stable.
        if out[0] < 0.0 {
            out.iter_mut().for_each(|c| *c = -*c);
        }
        out
    }

    /// `self ∘ other`, i.e. apply `other` first.
    pub fn compose(&self, other: &SE3Pose) -> SE3Pose {
        SE3Pose {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> SE3Pose {
        let rt = self.rotation.transpose();
        SE3Pose {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    pub fn transform_vector(&self, v: &Vec3) -> Vec3 {
        self.rotation * v
    }

    pub fn to_matrix(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    pub fn from_matrix(m: &Matrix4<f64>) -> SE3Pose {
        SE3Pose {
            rotation: m.fixed_view::<3, 3>(0, 0).into_owned(),
            translation: m.fixed_view::<3, 1>(0, 3).into_owned(),
        }
    }

    /// Rotation part as an axis-angle vector.
    pub fn rotation_log(&self) -> Vec3 {
        so3_log(&self.rotation)
    }

    /// Geodesic angle between the rotations of two poses, in radians.
    pub fn rotation_distance(&self, other: &SE3Pose) -> f64 {
        rotation_angle(&(self.rotation.transpose() * other.rotation))
    }

    pub fn translation_distance(&self, other: &SE3Pose) -> f64 {
        (self.translation - other.translation).norm()
    }

    /// Frobenius distance of `R Rᵀ` from identity and `det(R) - 1`.
    pub fn orthonormality_error(&self) -> (f64, f64) {
        let gram = self.rotation * self.rotation.transpose() - Matrix3::identity();
        (gram.norm(), self.rotation.determinant() - 1.0)
    }

    pub fn is_valid(&self, tol: f64) -> bool {
        let (g, d) = self.orthonormality_error();
        g <= tol && d.abs() <= tol && self.translation.iter().all(|v| v.is_finite())
    }

    /// Projects the rotation back onto SO(3) (polar decomposition).
    pub fn orthonormalized(&self) -> SE3Pose {
        SE3Pose {
            rotation: nearest_rotation(&self.rotation),
            translation: self.translation,
        }
    }

    /// Twist `(v, ω)` with `exp(twist) == self`.
    pub fn log(&self) -> Vector6<f64> {
        let omega = so3_log(&self.rotation);
        let v_inv = left_jacobian_inverse(&omega);
        let v = v_inv * self.translation;
        Vector6::new(v.x, v.y, v.z, omega.x, omega.y, omega.z)
    }

    pub fn exp(twist: &Vector6<f64>) -> SE3Pose {
        let v = Vec3::new(twist[0], twist[1], twist[2]);
        let omega = Vec3::new(twist[3], twist[4], twist[5]);
        SE3Pose {
            rotation: so3_exp(&omega),
            translation: left_jacobian(&omega) * v,
        }
    }

    /// Constant-twist (screw) interpolation: `self ∘ exp(s · log(self⁻¹ ∘ other))`.
    pub fn interpolate(&self, other: &SE3Pose, s: f64) -> SE3Pose {
        let delta = self.inverse().compose(other);
        let twist = delta.log();
        self.compose(&SE3Pose::exp(&(twist * s)))
    }

    /// Camera-style pose whose +z looks from `eye` toward `target`, +y pointing
    /// roughly along `-up` (image rows grow downward).
    pub fn look_at(eye: Vec3, target: Vec3, up: Vec3) -> SE3Pose {
        let z = (target - eye).normalize();
        let mut x = z.cross(&up);
        if x.norm() < 1e-9 {
            x = z.cross(&Vec3::x());
        }
        let x = x.normalize();
        let y = z.cross(&x);
        SE3Pose {
            rotation: Matrix3::from_columns(&[x, y, z]),
            translation: eye,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct SE3PoseRepr {
    rotation: [f64; 9],
    translation: [f64; 3],
}

impl Serialize for SE3Pose {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        SE3PoseRepr {
            rotation: rotation_row_major(&self.rotation),
            translation: [self.translation.x, self.translation.y, self.translation.z],
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for SE3Pose {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let r = SE3PoseRepr::deserialize(d)?;
        Ok(SE3Pose {
            rotation: Matrix3::from_row_slice(&r.rotation),
            translation: Vec3::from(r.translation),
        })
    }
}

pub fn rotation_row_major(r: &Matrix3<f64>) -> [f64; 9] {
    [
        r[(0, 0)],
        r[(0, 1)],
        r[(0, 2)],
        r[(1, 0)],
        r[(1, 1)],
        r[(1, 2)],
        r[(2, 0)],
        r[(2, 1)],
        r[(2, 2)],
    ]
}

pub fn skew(v: &Vec3) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Rodrigues' formula.
pub fn so3_exp(omega: &Vec3) -> Matrix3<f64> {
    let theta = omega.norm();
    let k = skew(omega);
    if theta < SMALL_ANGLE {
        return Matrix3::identity() + k + 0.5 * k * k;
    }
    let a = theta.sin() / theta;
    let b = (1.0 - theta.cos()) / (theta * theta);
    Matrix3::identity() + a * k + b * k * k
}

/// Inverse of [`so3_exp`], valid on the whole of SO(3) including angles near π.
pub fn so3_log(r: &Matrix3<f64>) -> Vec3 {
    let vee = Vec3::new(
        r[(2, 1)] - r[(1, 2)],
        r[(0, 2)] - r[(2, 0)],
        r[(1, 0)] - r[(0, 1)],
    );
    let theta = (0.5 * vee.norm()).atan2(0.5 * (r.trace() - 1.0));
    if theta < SMALL_ANGLE {
        return 0.5 * vee;
    }
    if std::f64::consts::PI - theta < 1e-4 {
        // Near π the antisymmetric part vanishes; recover the axis from the
        // symmetric part: sym(R) − cos θ·I = (1 − cos θ) a aᵀ.
        let b = (r + r.transpose()) * 0.5 - Matrix3::identity() * theta.cos();
        let diag = Vec3::new(b[(0, 0)], b[(1, 1)], b[(2, 2)]);
        let i = diag.imax();
        let mut axis = b.column(i).into_owned();
        axis /= axis.norm();
        if axis.dot(&vee) < 0.0 {
            axis = -axis;
        }
        return axis * theta;
    }
    vee * (theta / (2.0 * theta.sin()))
}

pub fn rotation_angle(r: &Matrix3<f64>) -> f64 {
    so3_log(r).norm()
}

/// SO(3) left Jacobian, the `V` matrix of the SE(3) exponential.
fn left_jacobian(omega: &Vec3) -> Matrix3<f64> {
    let theta = omega.norm();
    let k = skew(omega);
    if theta < SMALL_ANGLE {
        return Matrix3::identity() + 0.5 * k + k * k / 6.0;
    }
    let t2 = theta * theta;
    Matrix3::identity()
        + (1.0 - theta.cos()) / t2 * k
        + (theta - theta.sin()) / (t2 * theta) * k * k
}

fn left_jacobian_inverse(omega: &Vec3) -> Matrix3<f64> {
    let theta = omega.norm();
    let k = skew(omega);
    if theta < SMALL_ANGLE {
        return Matrix3::identity() - 0.5 * k + k * k / 12.0;
    }
    let half = 0.5 * theta;
    let coeff = (1.0 - half * half.cos() / half.sin()) / (theta * theta);
    Matrix3::identity() - 0.5 * k + coeff * k * k
}

/// Closest rotation in the Frobenius sense.
pub fn nearest_rotation(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let u = svd.u.expect("svd u");
    let vt = svd.v_t.expect("svd v_t");
    let d = (u * vt).determinant().signum();
    u * Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d)) * vt
}
