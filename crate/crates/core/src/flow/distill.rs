use serde::{Deserialize, Serialize};

use super::{ActionableFlow, FlowError, MaskSequence, TrackSet};
use crate::geometry::CameraIntrinsics;

/// Evenly spaced query pixels with half-cell margins, row by row.
pub fn sample_query_grid(intr: &CameraIntrinsics, rows: usize, cols: usize) -> Vec<(f64, f64)> {
    let (w, h) = (intr.width as f64, intr.height as f64);
    let mut out = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        let v = (i as f64 + 0.5) * h / rows as f64;
        for j in 0..cols {
            out.push(((j as f64 + 0.5) * w / cols as f64, v));
        }
    }
    out
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DistillOptions {
    /// Require mask containment in every frame, not only the first.
    #[serde(default)]
    pub per_frame_containment: bool,
}

/// Track indices that land inside the object mask and stay tracked.
pub fn grounded_track_indices(
    tracks: &TrackSet,
    masks: &MaskSequence,
    intr: &CameraIntrinsics,
    opts: DistillOptions,
) -> Result<Vec<usize>, FlowError> {
    if tracks.frames != masks.len() {
        return Err(FlowError::Shape(format!(
            "tracks have {} frames but masks have {}",
            tracks.frames,
            masks.len()
        )));
    }
    if masks.width != intr.width || masks.height != intr.height {
        return Err(FlowError::Shape(format!(
            "masks are {}x{} but camera is {}x{}",
            masks.width, masks.height, intr.width, intr.height
        )));
    }
    let inside = |t: usize, i: usize| match intr.project(tracks.position(t, i)) {
        Ok((u, v)) => masks.frames[t].contains(u, v),
        Err(_) => false,
    };
    let keep = (0..tracks.points)
        .filter(|&i| tracks.visible_throughout(i))
        .filter(|&i| {
            if opts.per_frame_containment {
                (0..tracks.frames).all(|t| inside(t, i))
            } else {
                inside(0, i)
            }
        })
        .collect();
    Ok(keep)
}

/// Filters dense tracks down to the object flow, preserving track order.
pub fn distill_flow(
    tracks: &TrackSet,
    masks: &MaskSequence,
    intr: &CameraIntrinsics,
    label: &str,
) -> Result<ActionableFlow, FlowError> {
    distill_flow_with(tracks, masks, intr, label, DistillOptions::default())
}

pub fn distill_flow_with(
    tracks: &TrackSet,
    masks: &MaskSequence,
    intr: &CameraIntrinsics,
    label: &str,
    opts: DistillOptions,
) -> Result<ActionableFlow, FlowError> {
    let keep = grounded_track_indices(tracks, masks, intr, opts)?;
    if keep.is_empty() {
        return Err(FlowError::NotGrounded(label.to_string()));
    }
    let mut positions = Vec::with_capacity(tracks.frames * keep.len());
    for t in 0..tracks.frames {
        positions.extend(keep.iter().map(|&i| *tracks.position(t, i)));
    }
    ActionableFlow::new(tracks.frames, keep.len(), positions, label)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::Mask;
    use crate::geometry::Vec3;

    #[test]
    fn grid_spacing() {
        let hd = CameraIntrinsics::new(1000.0, 1000.0, 640.0, 360.0, 1280, 720).unwrap();
        let g = sample_query_grid(&hd, 32, 32);
        assert_eq!(g.len(), 1024);
        assert_eq!(g[0], (20.0, 11.25));
        let sq = CameraIntrinsics::new(100.0, 100.0, 50.0, 50.0, 100, 100).unwrap();
        assert_eq!(sample_query_grid(&sq, 1, 1), vec![(50.0, 50.0)]);
        let tiny = CameraIntrinsics::new(4.0, 4.0, 2.0, 2.0, 4, 4).unwrap();
        assert_eq!(
            sample_query_grid(&tiny, 2, 2),
            vec![(1.0, 1.0), (3.0, 1.0), (1.0, 3.0), (3.0, 3.0)]
        );
    }

    fn setup() -> (CameraIntrinsics, TrackSet, MaskSequence) {
        let intr = CameraIntrinsics::new(10.0, 10.0, 5.0, 5.0, 10, 10).unwrap();
        // three tracks at pixels (2,5), (5,5), (8,5) at depth 1
        let pts = |dx: f64| {
            vec![
                Vec3::new(-0.3 + dx, 0.05, 1.0),
                Vec3::new(0.05 + dx, 0.05, 1.0),
                Vec3::new(0.35 + dx, 0.05, 1.0),
            ]
        };
        let mut positions = pts(0.0);
        positions.extend(pts(0.01));
        let tracks = TrackSet::new(2, 3, positions, vec![true; 6]).unwrap();
        let mut m0 = Mask::empty(10, 10);
        m0.set(2, 5, true);
        m0.set(8, 5, true);
        let masks = MaskSequence::new(vec![m0, Mask::empty(10, 10)]).unwrap();
        (intr, tracks, masks)
    }

    #[test]
    fn keeps_masked_tracks_in_order() {
        let (intr, tracks, masks) = setup();
        let flow = distill_flow(&tracks, &masks, &intr, "obj").unwrap();
        assert_eq!(flow.keypoints, 2);
        assert_eq!(flow.position(0, 0), tracks.position(0, 0));
        assert_eq!(flow.position(1, 1), tracks.position(1, 2));
    }

    #[test]
    fn drops_tracks_lost_later() {
        let (intr, tracks, masks) = setup();
        let mut vis = tracks.visibility().to_vec();
        vis[3 + 2] = false;
        let tracks = TrackSet::new(2, 3, tracks.positions().to_vec(), vis).unwrap();
        let idx =
            grounded_track_indices(&tracks, &masks, &intr, DistillOptions::default()).unwrap();
        assert_eq!(idx, vec![0]);
    }

    #[test]
    fn per_frame_containment_is_stricter() {
        let (intr, tracks, masks) = setup();
        let opts = DistillOptions {
            per_frame_containment: true,
        };
        let err = distill_flow_with(&tracks, &masks, &intr, "obj", opts).unwrap_err();
        assert!(err.to_string().contains("object not grounded"));
    }

    #[test]
    fn frame_count_mismatch() {
        let (intr, tracks, masks) = setup();
        let short = MaskSequence::new(vec![masks.frames[0].clone()]).unwrap();
        assert!(distill_flow(&tracks, &short, &intr, "obj").is_err());
    }
}
