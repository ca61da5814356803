use serde::{Deserialize, Serialize};

use super::SimError;
use crate::deformable::{chamfer_cost, flow_cost, ParticleState};
use crate::flow::ActionableFlow;
use crate::rigid::ObjectPoseTrajectory;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Thresholds {
    pub rotation_deg: f64,
    pub translation_mm: f64,
    /// Final correspondence RMSE for deformable success.
    pub rmse_mm: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            rotation_deg: 2.0,
            translation_mm: 5.0,
            rmse_mm: 20.0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub rotation_error_deg: Vec<f64>,
    pub translation_error_mm: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_chamfer_mm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_correspondence_rmse_mm: Option<f64>,
    pub success: bool,
}

/// Per-frame geodesic rotation and translation errors; success is judged
/// on the final frame.
pub fn evaluate_rigid(
    executed: &ObjectPoseTrajectory,
    gt: &ObjectPoseTrajectory,
    thresholds: &Thresholds,
) -> Result<Metrics, SimError> {
    if executed.len() != gt.len() || gt.is_empty() {
        return Err(SimError::LengthMismatch {
            executed: executed.len(),
            gt: gt.len(),
        });
    }
    if executed.frame != gt.frame {
        return Err(SimError::FrameMismatch);
    }
    let rotation_error_deg: Vec<f64> = executed
        .poses
        .iter()
        .zip(&gt.poses)
        .map(|(e, g)| e.rotation_distance(g).to_degrees())
        .collect();
    let translation_error_mm: Vec<f64> = executed
        .poses
        .iter()
        .zip(&gt.poses)
        .map(|(e, g)| e.translation_distance(g) * 1000.0)
        .collect();
    let last = gt.len() - 1;
    let success =
        rotation_error_deg[last] <= thresholds.rotation_deg && translation_error_mm[last] <= thresholds.translation_mm;
    Ok(Metrics {
        rotation_error_deg,
        translation_error_mm,
        final_chamfer_mm: None,
        final_correspondence_rmse_mm: None,
        success,
    })
}

/// Final-state errors against the last flow frame. The Chamfer figure is
/// the root of the mean of its two directed terms, so with a one-to-one
/// correspondence it never exceeds the correspondence RMSE.
pub fn evaluate_deformable(
    final_state: &ParticleState,
    flow: &ActionableFlow,
    correspondence: &[usize],
    thresholds: &Thresholds,
) -> Result<Metrics, SimError> {
    let goal = flow.frame(flow.frames - 1);
    let fc = flow_cost(&final_state.positions, goal, correspondence)?;
    let rmse_mm = (fc / final_state.len() as f64).sqrt() * 1000.0;
    let chamfer_mm = (chamfer_cost(&final_state.positions, goal)? / 2.0).sqrt() * 1000.0;
    Ok(Metrics {
        rotation_error_deg: Vec::new(),
        translation_error_mm: Vec::new(),
        final_chamfer_mm: Some(chamfer_mm),
        final_correspondence_rmse_mm: Some(rmse_mm),
        success: rmse_mm <= thresholds.rmse_mm,
    })
}
