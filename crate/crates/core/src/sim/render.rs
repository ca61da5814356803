use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::flow::Mask;
use crate::geometry::{CameraIntrinsics, DepthMap, SE3Pose, Vec3};

/// Solid the ray caster can hit, in world coordinates.
#[derive(Clone, Copy, Debug)]
pub(crate) enum Solid {
    Box { pose: SE3Pose, half: Vec3 },
    Cylinder { pose: SE3Pose, radius: f64, half_height: f64 },
    Sphere { center: Vec3, radius: f64 },
}

impl Solid {
    /// Nearest ray parameter `s > 0` with `origin + s·dir` on the surface.
    fn hit(&self, origin: &Vec3, dir: &Vec3) -> Option<f64> {
        match self {
            Solid::Box { pose, half } => {
                let inv = pose.inverse();
                let o = inv.transform_point(origin);
                let d = inv.transform_vector(dir);
                slab(&o, &d, half)
            }
            Solid::Cylinder {
                pose,
                radius,
                half_height,
            } => {
                let inv = pose.inverse();
                let o = inv.transform_point(origin);
                let d = inv.transform_vector(dir);
                cylinder(&o, &d, *radius, *half_height)
            }
            Solid::Sphere { center, radius } => {
                let oc = origin - center;
                let a = dir.norm_squared();
                let b = oc.dot(dir);
                let c = oc.norm_squared() - radius * radius;
                let disc = b * b - a * c;
                if disc < 0.0 {
                    return None;
                }
                let s = (-b - disc.sqrt()) / a;
                (s > 0.0).then_some(s)
            }
        }
    }
}

fn slab(o: &Vec3, d: &Vec3, half: &Vec3) -> Option<f64> {
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for k in 0..3 {
        if d[k].abs() < 1e-15 {
            if o[k].abs() > half[k] {
                return None;
            }
            continue;
        }
        let a = (-half[k] - o[k]) / d[k];
        let b = (half[k] - o[k]) / d[k];
        lo = lo.max(a.min(b));
        hi = hi.min(a.max(b));
    }
    (hi >= lo && lo > 0.0).then_some(lo)
}

fn cylinder(o: &Vec3, d: &Vec3, r: f64, hh: f64) -> Option<f64> {
    let mut best = f64::INFINITY;
    let a = d.x * d.x + d.y * d.y;
    if a > 1e-15 {
        let b = o.x * d.x + o.y * d.y;
        let c = o.x * o.x + o.y * o.y - r * r;
        let disc = b * b - a * c;
        if disc >= 0.0 {
            let s = (-b - disc.sqrt()) / a;
            if s > 0.0 && (o.z + s * d.z).abs() <= hh {
                best = s;
            }
        }
    }
    if d.z.abs() > 1e-15 {
        for cap in [-hh, hh] {
            let s = (cap - o.z) / d.z;
            let (x, y) = (o.x + s * d.x, o.y + s * d.y);
            if s > 0.0 && x * x + y * y <= r * r {
                best = best.min(s);
            }
        }
    }
    best.is_finite().then_some(best)
}

/// True depth image of the solids over a ground plane `z = ground`.
/// Pixels that see nothing are 0 (invalid).
pub(crate) fn render_depth(intr: &CameraIntrinsics, world_from_camera: &SE3Pose, solids: &[Solid], ground: f64) -> DepthMap {
    let (w, h) = (intr.width as usize, intr.height as usize);
    let origin = world_from_camera.translation;
    let rows: Vec<Vec<f64>> = (0..h)
        .into_par_iter()
        .map(|y| {
            (0..w)
                .map(|x| {
                    // unit-depth ray, so the ray parameter is the camera z
                    let ray_c = intr.ray(x as f64 + 0.5, y as f64 + 0.5);
                    let dir = world_from_camera.transform_vector(&ray_c);
                    let mut best = f64::INFINITY;
                    if dir.z < -1e-12 {
                        best = (ground - origin.z) / dir.z;
                    }
                    for s in solids {
                        if let Some(t) = s.hit(&origin, &dir) {
                            best = best.min(t);
                        }
                    }
                    if best.is_finite() && best > 0.0 {
                        best
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    DepthMap {
        width: intr.width,
        height: intr.height,
        values: rows.into_iter().flatten().collect(),
    }
}

fn cross2(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Counter-clockwise convex hull (monotone chain); collinear points dropped.
pub(crate) fn convex_hull(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &(f64, f64)>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2 && cross2(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

fn inside_hull(hull: &[(f64, f64)], p: (f64, f64)) -> bool {
    if hull.len() < 3 {
        return false;
    }
    (0..hull.len()).all(|i| cross2(hull[i], hull[(i + 1) % hull.len()], p) >= 0.0)
}

/// Pixels whose centre lies in the convex hull of the projections, plus
/// every pixel holding a projection.
pub(crate) fn hull_mask(intr: &CameraIntrinsics, pixels: &[(f64, f64)]) -> Mask {
    let mut mask = Mask::empty(intr.width, intr.height);
    let hull = convex_hull(pixels);
    if let Some(((x0, y0), (x1, y1))) = bounds(&hull) {
        let xs = x0.floor().max(0.0) as u32..(x1.ceil().min(intr.width as f64) as u32);
        for y in y0.floor().max(0.0) as u32..(y1.ceil().min(intr.height as f64) as u32) {
            for x in xs.clone() {
                if inside_hull(&hull, (x as f64 + 0.5, y as f64 + 0.5)) {
                    mask.set(x, y, true);
                }
            }
        }
    }
    for &(u, v) in pixels {
        if let Some((x, y)) = intr.pixel_index(u, v) {
            mask.set(x, y, true);
        }
    }
    mask
}

fn bounds(pts: &[(f64, f64)]) -> Option<((f64, f64), (f64, f64))> {
    pts.iter().fold(None, |acc, &(u, v)| match acc {
        None => Some(((u, v), (u, v))),
        Some(((a, b), (c, d))) => Some(((a.min(u), b.min(v)), (c.max(u), d.max(v)))),
    })
}

/// Whether any pixel within `margin` of `(u, v)` is set.
pub(crate) fn near_mask(mask: &Mask, u: f64, v: f64, margin: i64) -> bool {
    let (x, y) = (u.floor() as i64, v.floor() as i64);
    for dy in -margin..=margin {
        for dx in -margin..=margin {
            let (px, py) = (x + dx, y + dy);
            if px >= 0 && py >= 0 && mask.get(px as u32, py as u32) {
                return true;
            }
        }
    }
    false
}

/// Area-weighted uniform samples on the surface of a centred box.
pub(crate) fn sample_box_surface(size: [f64; 3], n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec3> {
    let h = Vec3::from(size) / 2.0;
    let areas = [size[1] * size[2], size[0] * size[2], size[0] * size[1]];
    let total: f64 = 2.0 * areas.iter().sum::<f64>();
    (0..n)
        .map(|_| {
            let mut pick = rng.random_range(0.0..total);
            let mut face = 0;
            while face < 5 && pick >= areas[face / 2] {
                pick -= areas[face / 2];
                face += 1;
            }
            let axis = face / 2;
            let sign = if face % 2 == 0 { -1.0 } else { 1.0 };
            let mut p = Vec3::zeros();
            for k in 0..3 {
                p[k] = if k == axis {
                    sign * h[k]
                } else {
                    rng.random_range(-h[k]..h[k])
                };
            }
            p
        })
        .collect()
}

/// Area-weighted uniform samples on a closed cylinder about object z.
pub(crate) fn sample_cylinder_surface(radius: f64, height: f64, n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec3> {
    let side = 2.0 * std::f64::consts::PI * radius * height;
    let cap = std::f64::consts::PI * radius * radius;
    (0..n)
        .map(|_| {
            let pick = rng.random_range(0.0..side + 2.0 * cap);
            let phi = rng.random_range(0.0..std::f64::consts::TAU);
            if pick < side {
                Vec3::new(
                    radius * phi.cos(),
                    radius * phi.sin(),
                    rng.random_range(-height / 2.0..height / 2.0),
                )
            } else {
                let r = radius * rng.random_range(0.0f64..1.0).sqrt();
                let z = if pick < side + cap { -height / 2.0 } else { height / 2.0 };
                Vec3::new(r * phi.cos(), r * phi.sin(), z)
            }
        })
        .collect()
}
