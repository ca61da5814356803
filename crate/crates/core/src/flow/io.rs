//! Flow, mask and depth file formats.
//!
//! Binary flow layout (little-endian): magic `NVFL`, `u32` version (1),
//! `u32` frames, `u32` keypoints, then `frames * keypoints * 3` `f32`
//! coordinates, frame-major. The label is not stored in the binary form.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ActionableFlow, FlowError, Mask, MaskSequence};
use crate::geometry::{DepthMap, Vec3};
use crate::pnm::GrayImage;

pub const FLOW_MAGIC: &[u8; 4] = b"NVFL";
pub const FLOW_VERSION: u32 = 1;
const DEPTH_MAGIC: &[u8; 4] = b"NVDM";

pub fn encode_flow_binary(flow: &ActionableFlow) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + flow.positions().len() * 12);
    out.extend_from_slice(FLOW_MAGIC);
    out.extend_from_slice(&FLOW_VERSION.to_le_bytes());
    out.extend_from_slice(&(flow.frames as u32).to_le_bytes());
    out.extend_from_slice(&(flow.keypoints as u32).to_le_bytes());
    for p in flow.positions() {
        for c in p.iter() {
            out.extend_from_slice(&(*c as f32).to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], FlowError> {
        if self.bytes.len() - self.pos < n {
            return Err(FlowError::UnexpectedEof {
                offset: self.bytes.len(),
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, FlowError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn f32(&mut self) -> Result<f32, FlowError> {
        let b = self.take(4)?;
        Ok(f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

pub fn decode_flow_binary(bytes: &[u8]) -> Result<ActionableFlow, FlowError> {
    let mut c = Cursor { bytes, pos: 0 };
    let magic = c
        .take(4)
        .map_err(|_| FlowError::NotAFlowFile { offset: 0 })?;
    if magic != FLOW_MAGIC {
        return Err(FlowError::NotAFlowFile { offset: 0 });
    }
    let version = c.u32()?;
    if version != FLOW_VERSION {
        return Err(FlowError::Malformed {
            offset: 4,
            reason: format!("unsupported version {version}"),
        });
    }
    let frames = c.u32()? as usize;
    let keypoints = c.u32()? as usize;
    if frames == 0 || keypoints == 0 {
        return Err(FlowError::Malformed {
            offset: 8,
            reason: format!("empty flow {frames}x{keypoints}"),
        });
    }
    let count = frames
        .checked_mul(keypoints)
        .and_then(|n| n.checked_mul(12))
        .ok_or(FlowError::Malformed {
            offset: 8,
            reason: "dimensions overflow".into(),
        })?;
    if bytes.len() - c.pos < count {
        return Err(FlowError::UnexpectedEof {
            offset: bytes.len(),
        });
    }
    let mut positions = Vec::with_capacity(frames * keypoints);
    for _ in 0..frames * keypoints {
        let at = c.pos;
        let p = Vec3::new(c.f32()? as f64, c.f32()? as f64, c.f32()? as f64);
        if !p.iter().all(|v| v.is_finite()) {
            return Err(FlowError::Malformed {
                offset: at,
                reason: "non-finite coordinate".into(),
            });
        }
        positions.push(p);
    }
    if c.pos != bytes.len() {
        return Err(FlowError::Malformed {
            offset: c.pos,
            reason: "trailing bytes".into(),
        });
    }
    ActionableFlow::new(frames, keypoints, positions, "")
}

#[derive(Serialize, Deserialize)]
struct FlowJson {
    version: u32,
    frames: usize,
    points: usize,
    label: String,
    positions: Vec<Vec<[f64; 3]>>,
}

pub fn encode_flow_json(flow: &ActionableFlow) -> String {
    let doc = FlowJson {
        version: FLOW_VERSION,
        frames: flow.frames,
        points: flow.keypoints,
        label: flow.label.clone(),
        positions: (0..flow.frames)
            .map(|t| flow.frame(t).iter().map(|p| [p.x, p.y, p.z]).collect())
            .collect(),
    };
    serde_json::to_string(&doc).expect("flow json")
}

pub fn decode_flow_json(text: &str) -> Result<ActionableFlow, FlowError> {
    let doc: FlowJson = serde_json::from_str(text).map_err(|e| FlowError::Malformed {
        offset: 0,
        reason: e.to_string(),
    })?;
    if doc.version != FLOW_VERSION {
        return Err(FlowError::Malformed {
            offset: 0,
            reason: format!("unsupported version {}", doc.version),
        });
    }
    if doc.positions.len() != doc.frames || doc.positions.iter().any(|f| f.len() != doc.points) {
        return Err(FlowError::Malformed {
            offset: 0,
            reason: "positions do not match frames/points".into(),
        });
    }
    ActionableFlow::new(
        doc.frames,
        doc.points,
        doc.positions
            .into_iter()
            .flatten()
            .map(Vec3::from)
            .collect(),
        doc.label,
    )
}

/// Writes JSON for a `.json` path, binary otherwise.
pub fn write_flow(flow: &ActionableFlow, path: &Path) -> Result<(), FlowError> {
    let is_json = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json {
        fs::write(path, encode_flow_json(flow))?;
    } else {
        fs::write(path, encode_flow_binary(flow))?;
    }
    Ok(())
}

/// Reads either flow format, sniffing the first bytes.
pub fn read_flow(path: &Path) -> Result<ActionableFlow, FlowError> {
    let bytes = fs::read(path).map_err(|e| {
        FlowError::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })?;
    if bytes.starts_with(FLOW_MAGIC) {
        return decode_flow_binary(&bytes);
    }
    match bytes.iter().find(|b| !b.is_ascii_whitespace()) {
        Some(b'{') => {
            decode_flow_json(
                std::str::from_utf8(&bytes).map_err(|e| FlowError::Malformed {
                    offset: e.valid_up_to(),
                    reason: "invalid utf-8".into(),
                })?,
            )
        }
        _ => decode_flow_binary(&bytes),
    }
}

// ---- masks ----

#[derive(Serialize, Deserialize)]
struct MaskRleJson {
    width: u32,
    height: u32,
    frames: Vec<RleFrame>,
}

#[derive(Serialize, Deserialize)]
struct RleFrame {
    /// Alternating run lengths over the row-major pixels, starting with a
    /// (possibly empty) run of background.
    counts: Vec<u32>,
}

pub fn encode_masks_rle(masks: &MaskSequence) -> String {
    let frames = masks
        .frames
        .iter()
        .map(|m| {
            let mut counts = Vec::new();
            let mut current = false;
            let mut run = 0u32;
            for &b in &m.data {
                if b == current {
                    run += 1;
                } else {
                    counts.push(run);
                    current = b;
                    run = 1;
                }
            }
            counts.push(run);
            RleFrame { counts }
        })
        .collect();
    serde_json::to_string(&MaskRleJson {
        width: masks.width,
        height: masks.height,
        frames,
    })
    .expect("mask json")
}

pub fn decode_masks_rle(text: &str) -> Result<MaskSequence, FlowError> {
    let doc: MaskRleJson = serde_json::from_str(text).map_err(|e| FlowError::Malformed {
        offset: 0,
        reason: e.to_string(),
    })?;
    let n = doc.width as usize * doc.height as usize;
    let mut frames = Vec::with_capacity(doc.frames.len());
    for (i, f) in doc.frames.into_iter().enumerate() {
        let mut data = Vec::with_capacity(n);
        let mut value = false;
        for c in f.counts {
            data.extend(std::iter::repeat_n(value, c as usize));
            value = !value;
        }
        if data.len() != n {
            return Err(FlowError::Malformed {
                offset: 0,
                reason: format!(
                    "mask frame {i} decodes to {} pixels, expected {n}",
                    data.len()
                ),
            });
        }
        frames.push(Mask {
            width: doc.width,
            height: doc.height,
            data,
        });
    }
    MaskSequence::new(frames)
}

pub fn mask_to_pgm(mask: &Mask) -> GrayImage {
    GrayImage {
        width: mask.width,
        height: mask.height,
        maxval: 255,
        data: mask.data.iter().map(|b| if *b { 255 } else { 0 }).collect(),
    }
}

pub fn mask_from_pgm(img: &GrayImage) -> Mask {
    let half = (img.maxval / 2).max(1);
    Mask {
        width: img.width,
        height: img.height,
        data: img.data.iter().map(|v| *v >= half).collect(),
    }
}

/// Writes `dir/0000.pgm`, `dir/0001.pgm`, ...
pub fn write_mask_stack(masks: &MaskSequence, dir: &Path) -> Result<(), FlowError> {
    fs::create_dir_all(dir)?;
    for (t, m) in masks.frames.iter().enumerate() {
        let f = fs::File::create(dir.join(format!("{t:04}.pgm")))?;
        mask_to_pgm(m).write_pgm(std::io::BufWriter::new(f))?;
    }
    Ok(())
}

pub fn read_mask_stack(dir: &Path) -> Result<MaskSequence, FlowError> {
    let mut frames = Vec::new();
    for path in numbered_files(dir, "pgm")? {
        let img = GrayImage::read_pgm(fs::File::open(&path)?)?;
        frames.push(mask_from_pgm(&img));
    }
    MaskSequence::new(frames)
}

// ---- depth ----

/// 16-bit PGM in millimetres; 0 stays invalid, values saturate at 65.535 m.
pub fn depth_to_pgm(depth: &DepthMap) -> GrayImage {
    GrayImage {
        width: depth.width,
        height: depth.height,
        maxval: 65535,
        data: depth
            .values
            .iter()
            .map(|v| (v * 1000.0).round().clamp(0.0, 65535.0) as u16)
            .collect(),
    }
}

pub fn depth_from_pgm(img: &GrayImage) -> DepthMap {
    DepthMap {
        width: img.width,
        height: img.height,
        values: img.data.iter().map(|v| *v as f64 / 1000.0).collect(),
    }
}

/// Raw float depth: magic `NVDM`, `u32` width, `u32` height, then `f32` metres.
pub fn encode_depth_f32(depth: &DepthMap) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + depth.values.len() * 4);
    out.extend_from_slice(DEPTH_MAGIC);
    out.extend_from_slice(&depth.width.to_le_bytes());
    out.extend_from_slice(&depth.height.to_le_bytes());
    for v in &depth.values {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    out
}

pub fn decode_depth_f32(bytes: &[u8]) -> Result<DepthMap, FlowError> {
    let mut c = Cursor { bytes, pos: 0 };
    if c.take(4).ok() != Some(DEPTH_MAGIC.as_slice()) {
        return Err(FlowError::Malformed {
            offset: 0,
            reason: "not a depth file".into(),
        });
    }
    let width = c.u32()?;
    let height = c.u32()?;
    let n = width as usize * height as usize;
    let mut values = Vec::with_capacity(n);
    for _ in 0..n {
        values.push(c.f32()? as f64);
    }
    DepthMap::new(width, height, values).map_err(|e| FlowError::Malformed {
        offset: 12,
        reason: e.to_string(),
    })
}

pub fn write_depth_stack(depth: &[DepthMap], dir: &Path) -> Result<(), FlowError> {
    fs::create_dir_all(dir)?;
    for (t, d) in depth.iter().enumerate() {
        let f = fs::File::create(dir.join(format!("{t:04}.pgm")))?;
        depth_to_pgm(d).write_pgm(std::io::BufWriter::new(f))?;
    }
    Ok(())
}

/// Reads a directory of depth frames (`.pgm` millimetres or `.f32` raw).
pub fn read_depth_stack(dir: &Path) -> Result<Vec<DepthMap>, FlowError> {
    let mut pgm = numbered_files(dir, "pgm")?;
    if pgm.is_empty() {
        pgm = numbered_files(dir, "f32")?;
    }
    pgm.iter().map(|p| read_depth(p)).collect()
}

pub fn read_depth(path: &Path) -> Result<DepthMap, FlowError> {
    let bytes = fs::read(path)?;
    if bytes.starts_with(DEPTH_MAGIC) {
        decode_depth_f32(&bytes)
    } else {
        Ok(depth_from_pgm(&GrayImage::read_pgm(&bytes[..])?))
    }
}

fn numbered_files(dir: &Path, ext: &str) -> Result<Vec<std::path::PathBuf>, FlowError> {
    let mut files: Vec<_> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == ext))
        .collect();
    files.sort();
    Ok(files)
}
