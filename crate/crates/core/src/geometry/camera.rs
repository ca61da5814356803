use serde::{Deserialize, Serialize};

use super::{GeometryError, Vec3};

/// Pinhole intrinsics; no distortion model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl CameraIntrinsics {
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: u32,
        height: u32,
    ) -> Result<Self, GeometryError> {
        let intr = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        intr.validate()?;
        Ok(intr)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let ok = self.fx > 0.0
            && self.fy > 0.0
            && self.cx >= 0.0
            && self.cx < self.width as f64
            && self.cy >= 0.0
            && self.cy < self.height as f64;
        if ok {
            Ok(())
        } else {
            Err(GeometryError::InvalidIntrinsics(*self))
        }
    }

    /// Pixel coordinates of a camera-frame point.
    pub fn project(&self, p: &Vec3) -> Result<(f64, f64), GeometryError> {
        if !(p.z > 0.0) {
            return Err(GeometryError::BehindCamera { z: p.z });
        }
        Ok((self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy))
    }

    pub fn backproject(&self, u: f64, v: f64, depth: f64) -> Result<Vec3, GeometryError> {
        if !(depth > 0.0) {
            return Err(GeometryError::NonPositiveDepth(depth));
        }
        Ok(Vec3::new(
            (u - self.cx) * depth / self.fx,
            (v - self.cy) * depth / self.fy,
            depth,
        ))
    }

    /// Unit-depth ray through pixel `(u, v)` (z component equals 1).
    pub fn ray(&self, u: f64, v: f64) -> Vec3 {
        Vec3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0)
    }

    pub fn contains(&self, u: f64, v: f64) -> bool {
        u >= 0.0 && v >= 0.0 && u < self.width as f64 && v < self.height as f64
    }

    /// Integer pixel holding continuous coordinate `(u, v)`, if inside the image.
    pub fn pixel_index(&self, u: f64, v: f64) -> Option<(u32, u32)> {
        self.contains(u, v)
            .then(|| (u.floor() as u32, v.floor() as u32))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn intr() -> CameraIntrinsics {
        CameraIntrinsics::new(500.0, 500.0, 320.0, 240.0, 640, 480).unwrap()
    }

    #[test]
    fn optical_axis_hits_principal_point() {
        assert_eq!(
            intr().project(&Vec3::new(0.0, 0.0, 1.0)).unwrap(),
            (320.0, 240.0)
        );
        assert_eq!(
            intr().project(&Vec3::new(0.1, 0.0, 1.0)).unwrap(),
            (370.0, 240.0)
        );
    }

    #[test]
    fn behind_camera_is_an_error() {
        let err = intr().project(&Vec3::new(0.0, 0.0, -1.0)).unwrap_err();
        assert!(err.to_string().contains("behind camera"));
        assert!(intr().project(&Vec3::new(0.0, 0.0, 0.0)).is_err());
        assert!(intr().backproject(1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn project_backproject_roundtrip() {
        let c = intr();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..10_000 {
            let u = rng.random_range(0.0..640.0);
            let v = rng.random_range(0.0..480.0);
            let z = rng.random_range(0.1..10.0);
            let p = c.backproject(u, v, z).unwrap();
            let (u2, v2) = c.project(&p).unwrap();
            assert!((u - u2).abs() < 1e-9 && (v - v2).abs() < 1e-9);
            let p2 = c.backproject(u2, v2, p.z).unwrap();
            assert!((p - p2).norm() < 1e-9);
        }
    }

    #[test]
    fn rejects_bad_intrinsics() {
        assert!(CameraIntrinsics::new(0.0, 1.0, 1.0, 1.0, 4, 4).is_err());
        assert!(CameraIntrinsics::new(1.0, 1.0, 4.0, 1.0, 4, 4).is_err());
    }
}
