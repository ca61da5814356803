use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::FlowError;
use crate::geometry::{all_finite, Vec3};

/// Dense 3D point tracks in the camera frame, `frames x points`, frame-major.
#[derive(Clone, Debug, PartialEq)]
pub struct TrackSet {
    pub frames: usize,
    pub points: usize,
    positions: Vec<Vec3>,
    visible: Vec<bool>,
}

impl TrackSet {
    pub fn new(
        frames: usize,
        points: usize,
        positions: Vec<Vec3>,
        visible: Vec<bool>,
    ) -> Result<Self, FlowError> {
        if frames < 2 || points < 1 {
            return Err(FlowError::Shape(format!(
                "track set needs >= 2 frames and >= 1 point, got {frames}x{points}"
            )));
        }
        if positions.len() != frames * points || visible.len() != frames * points {
            return Err(FlowError::Shape(format!(
                "track set {frames}x{points} given {} positions and {} visibility flags",
                positions.len(),
                visible.len()
            )));
        }
        for (i, (p, v)) in positions.iter().zip(&visible).enumerate() {
            if *v && !all_finite(p) {
                return Err(FlowError::Shape(format!(
                    "visible track {} at frame {} is not finite",
                    i % points,
                    i / points
                )));
            }
        }
        Ok(Self {
            frames,
            points,
            positions,
            visible,
        })
    }

    pub fn position(&self, t: usize, i: usize) -> &Vec3 {
        &self.positions[t * self.points + i]
    }

    pub fn is_visible(&self, t: usize, i: usize) -> bool {
        self.visible[t * self.points + i]
    }

    pub fn visible_throughout(&self, i: usize) -> bool {
        (0..self.frames).all(|t| self.is_visible(t, i))
    }

    pub fn positions(&self) -> &[Vec3] {
        &self.positions
    }

    pub fn visibility(&self) -> &[bool] {
        &self.visible
    }

    /// Uniformly rescales every position (depth calibration of the tracks).
    pub fn scaled(&self, scale: f64) -> TrackSet {
        TrackSet {
            frames: self.frames,
            points: self.points,
            positions: self.positions.iter().map(|p| p * scale).collect(),
            visible: self.visible.clone(),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct TrackSetRepr {
    frames: usize,
    points: usize,
    positions: Vec<Vec<[f64; 3]>>,
    visible: Vec<Vec<bool>>,
}

impl Serialize for TrackSet {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        TrackSetRepr {
            frames: self.frames,
            points: self.points,
            positions: self
                .positions
                .chunks(self.points)
                .map(|row| row.iter().map(|p| [p.x, p.y, p.z]).collect())
                .collect(),
            visible: self
                .visible
                .chunks(self.points)
                .map(|r| r.to_vec())
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for TrackSet {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let r = TrackSetRepr::deserialize(d)?;
        let positions = r.positions.into_iter().flatten().map(Vec3::from).collect();
        let visible = r.visible.into_iter().flatten().collect();
        TrackSet::new(r.frames, r.points, positions, visible).map_err(serde::de::Error::custom)
    }
}

/// One binary segmentation mask, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Mask {
    pub width: u32,
    pub height: u32,
    pub data: Vec<bool>,
}

impl Mask {
    pub fn empty(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            data: vec![false; width as usize * height as usize],
        }
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        x < self.width
            && y < self.height
            && self.data[y as usize * self.width as usize + x as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, value: bool) {
        if x < self.width && y < self.height {
            let w = self.width as usize;
            self.data[y as usize * w + x as usize] = value;
        }
    }

    /// Membership of the continuous pixel coordinate `(u, v)`.
    pub fn contains(&self, u: f64, v: f64) -> bool {
        if !(u >= 0.0 && v >= 0.0) {
            return false;
        }
        let (x, y) = (u.floor(), v.floor());
        x < self.width as f64 && y < self.height as f64 && self.get(x as u32, y as u32)
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|b| **b).count()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MaskSequence {
    pub width: u32,
    pub height: u32,
    pub frames: Vec<Mask>,
}

impl MaskSequence {
    pub fn new(frames: Vec<Mask>) -> Result<Self, FlowError> {
        let first = frames
            .first()
            .ok_or_else(|| FlowError::Shape("mask sequence is empty".into()))?;
        let (width, height) = (first.width, first.height);
        if frames
            .iter()
            .any(|m| m.width != width || m.height != height)
        {
            return Err(FlowError::Shape("mask frames differ in size".into()));
        }
        Ok(Self {
            width,
            height,
            frames,
        })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// Per-keypoint 3D trajectories of the target object (`frames x keypoints`).
#[derive(Clone, Debug, PartialEq)]
pub struct ActionableFlow {
    pub frames: usize,
    pub keypoints: usize,
    pub label: String,
    positions: Vec<Vec3>,
}

impl ActionableFlow {
    pub fn new(
        frames: usize,
        keypoints: usize,
        positions: Vec<Vec3>,
        label: impl Into<String>,
    ) -> Result<Self, FlowError> {
        if frames < 1 || keypoints < 1 {
            return Err(FlowError::Shape(format!(
                "flow must be non-empty, got {frames}x{keypoints}"
            )));
        }
        if positions.len() != frames * keypoints {
            return Err(FlowError::Shape(format!(
                "flow {frames}x{keypoints} given {} positions",
                positions.len()
            )));
        }
        if let Some(i) = positions.iter().position(|p| !all_finite(p)) {
            return Err(FlowError::Shape(format!(
                "flow keypoint {} at frame {} is not finite",
                i % keypoints,
                i / keypoints
            )));
        }
        Ok(Self {
            frames,
            keypoints,
            label: label.into(),
            positions,
        })
    }

    /// Builds a flow from per-frame keypoint lists.
    pub fn from_frames(
        frames: Vec<Vec<Vec3>>,
        label: impl Into<String>,
    ) -> Result<Self, FlowError> {
        let t = frames.len();
        let k = frames.first().map(|f| f.len()).unwrap_or(0);
        if frames.iter().any(|f| f.len() != k) {
            return Err(FlowError::Shape("ragged flow frames".into()));
        }
        Self::new(t, k, frames.into_iter().flatten().collect(), label)
    }

    pub fn position(&self, t: usize, k: usize) -> &Vec3 {
        &self.positions[t * self.keypoints + k]
    }

    pub fn frame(&self, t: usize) -> &[Vec3] {
        &self.positions[t * self.keypoints..(t + 1) * self.keypoints]
    }

    pub fn positions(&self) -> &[Vec3] {
        &self.positions
    }

    pub fn map_points(&self, f: impl Fn(&Vec3) -> Vec3) -> ActionableFlow {
        ActionableFlow {
            frames: self.frames,
            keypoints: self.keypoints,
            label: self.label.clone(),
            positions: self.positions.iter().map(f).collect(),
        }
    }

    /// Keeps only the listed keypoints, in the given order.
    pub fn select_keypoints(&self, keep: &[usize]) -> Result<ActionableFlow, FlowError> {
        let mut positions = Vec::with_capacity(self.frames * keep.len());
        for t in 0..self.frames {
            for &k in keep {
                positions.push(*self.position(t, k));
            }
        }
        ActionableFlow::new(self.frames, keep.len(), positions, self.label.clone())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FlowCandidate {
    pub id: u32,
    #[serde(skip)]
    pub flow: ActionableFlow,
    pub score: f64,
}
