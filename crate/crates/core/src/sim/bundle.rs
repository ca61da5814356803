use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{MirrorFixture, SceneBundle, SceneConfig, SimError};
use crate::deformable::DynamicsSpec;
use crate::flow::io::{depth_to_pgm, encode_flow_binary, mask_to_pgm, read_depth, read_depth_stack, read_mask_stack};
use crate::flow::{read_flow, TrackSet};
use crate::geometry::{CameraIntrinsics, SE3Pose};
use crate::rigid::{ObjectPoseTrajectory, PoseFrame};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileHash {
    pub path: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BundleManifest {
    pub seed: u64,
    pub frames: usize,
    pub object: String,
    /// Every bundle file except the manifest, sorted by path.
    pub files: Vec<FileHash>,
}

/// `camera.json`: intrinsics and the camera's world pose.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraFile {
    pub intrinsics: CameraIntrinsics,
    pub world_from_camera: SE3Pose,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SimError + '_ {
    move |source| SimError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn format_err(path: &Path, reason: impl ToString) -> SimError {
    SimError::Format {
        path: path.display().to_string(),
        reason: reason.to_string(),
    }
}

struct Writer<'a> {
    root: &'a Path,
    files: Vec<FileHash>,
}

impl Writer<'_> {
    fn put(&mut self, rel: &str, bytes: &[u8]) -> Result<(), SimError> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(io_err(parent))?;
        }
        fs::write(&path, bytes).map_err(io_err(&path))?;
        self.files.push(FileHash {
            path: rel.to_string(),
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    fn json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<(), SimError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| format_err(Path::new(rel), e))?;
        text.push('\n');
        self.put(rel, text.as_bytes())
    }
}

/// Writes the bundle layout under `dir` and returns its manifest, which is
/// also written as `manifest.json`.
pub fn write_bundle(bundle: &SceneBundle, dir: &Path) -> Result<BundleManifest, SimError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut w = Writer {
        root: dir,
        files: Vec::new(),
    };
    w.json("scene.json", &bundle.config)?;
    w.json(
        "camera.json",
        &CameraFile {
            intrinsics: bundle.intrinsics,
            world_from_camera: bundle.camera_pose,
        },
    )?;
    w.json("tracks.json", &bundle.tracks)?;
    for (t, m) in bundle.masks.frames.iter().enumerate() {
        let mut bytes = Vec::new();
        mask_to_pgm(m).write_pgm(&mut bytes).map_err(io_err(dir))?;
        w.put(&format!("masks/{t:04}.pgm"), &bytes)?;
    }
    for (t, d) in bundle.depth.iter().enumerate() {
        let mut bytes = Vec::new();
        depth_to_pgm(d).write_pgm(&mut bytes).map_err(io_err(dir))?;
        w.put(&format!("depth/{t:04}.pgm"), &bytes)?;
    }
    let mut bytes = Vec::new();
    depth_to_pgm(&bundle.reference_depth)
        .write_pgm(&mut bytes)
        .map_err(io_err(dir))?;
    w.put("reference_depth.pgm", &bytes)?;
    w.put("gt_flow.nvfl", &encode_flow_binary(&bundle.gt_flow))?;
    if let Some(p) = &bundle.gt_poses {
        w.json("gt_poses.json", &p.to_json())?;
    }
    w.json("gt_membership.json", &bundle.gt_membership)?;
    if let Some(d) = &bundle.dynamics {
        w.json("dynamics.json", d)?;
    }
    if let Some(f) = &bundle.fixture {
        w.json("fixture.json", f)?;
    }
    let mut files = w.files;
    files.sort_by(|a, b| a.path.cmp(&b.path));
    let manifest = BundleManifest {
        seed: bundle.config.seed,
        frames: bundle.frames(),
        object: bundle.config.object.label().to_string(),
        files,
    };
    let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| format_err(dir, e))?;
    text.push('\n');
    let path = dir.join("manifest.json");
    fs::write(&path, text).map_err(io_err(&path))?;
    Ok(manifest)
}

pub fn read_camera(path: &Path) -> Result<CameraFile, SimError> {
    read_json(path)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, SimError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| format_err(path, e))
}

/// Reads a bundle directory. Depth comes back at millimetre resolution.
pub fn read_bundle(dir: &Path) -> Result<SceneBundle, SimError> {
    if !dir.is_dir() {
        return Err(SimError::Io {
            path: dir.display().to_string(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "bundle directory not found"),
        });
    }
    let config: SceneConfig = read_json(&dir.join("scene.json"))?;
    let camera: CameraFile = read_json(&dir.join("camera.json"))?;
    let tracks: TrackSet = read_json(&dir.join("tracks.json"))?;
    let masks = read_mask_stack(&dir.join("masks")).map_err(|e| format_err(&dir.join("masks"), e))?;
    let depth = read_depth_stack(&dir.join("depth")).map_err(|e| format_err(&dir.join("depth"), e))?;
    let ref_path = dir.join("reference_depth.pgm");
    let reference_depth = read_depth(&ref_path).map_err(|e| format_err(&ref_path, e))?;
    let flow_path = dir.join("gt_flow.nvfl");
    let gt_flow = read_flow(&flow_path).map_err(|e| format_err(&flow_path, e))?;
    let poses_path = dir.join("gt_poses.json");
    let gt_poses = if poses_path.exists() {
        let v: serde_json::Value = read_json(&poses_path)?;
        Some(ObjectPoseTrajectory::from_json(&v, PoseFrame::World).map_err(|e| format_err(&poses_path, e))?)
    } else {
        None
    };
    let gt_membership: Vec<usize> = read_json(&dir.join("gt_membership.json"))?;
    let dyn_path = dir.join("dynamics.json");
    let dynamics: Option<DynamicsSpec> = if dyn_path.exists() {
        Some(read_json(&dyn_path)?)
    } else {
        None
    };
    let fx_path = dir.join("fixture.json");
    let fixture: Option<MirrorFixture> = if fx_path.exists() {
        Some(read_json(&fx_path)?)
    } else {
        None
    };
    if masks.len() != tracks.frames || depth.len() != tracks.frames || gt_flow.frames != tracks.frames {
        return Err(format_err(dir, "tracks, masks, depth and flow disagree on the frame count"));
    }
    Ok(SceneBundle {
        config,
        intrinsics: camera.intrinsics,
        camera_pose: camera.world_from_camera,
        tracks,
        masks,
        depth,
        reference_depth,
        gt_flow,
        gt_poses,
        gt_membership,
        dynamics,
        fixture,
    })
}
