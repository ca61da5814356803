//! Deformable branch: a mass-spring stand-in for learned particle dynamics,
//! the correspondence and Chamfer costs, and receding-horizon planning.

mod cost;
mod model;
mod mpc;

pub use cost::{build_correspondence, chamfer_cost, flow_cost};
pub use model::{
    Edge, GripperAction, MassSpringModel, ParticleState, DEFAULT_ACTION_CAP, DEFAULT_DAMPING,
    DEFAULT_DT, DEFAULT_MASS, DEFAULT_STIFFNESS, DEFAULT_SUBSTEPS,
};
pub use mpc::{mpc_rollout, plan_actions, plan_actions_from, CemConfig, MpcConfig, Objective, Planner, RolloutLog};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{SE3Pose, Vec3};

#[derive(Debug, Error)]
pub enum DeformableError {
    #[error("degenerate edge between particles {i} and {j}")]
    DegenerateEdge { i: usize, j: usize },
    #[error("size mismatch: expected {expected}, got {got}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("goal point set is empty")]
    EmptyGoal,
    #[error("invalid dynamics model: {0}")]
    InvalidModel(String),
    #[error("frame {t} out of range for a flow of {frames} frames")]
    FrameOutOfRange { t: usize, frames: usize },
    #[error("flow needs at least 2 frames, got {0}")]
    FlowTooShort(usize),
}

fn d_stiffness() -> f64 {
    DEFAULT_STIFFNESS
}
fn d_damping() -> f64 {
    DEFAULT_DAMPING
}
fn d_mass() -> f64 {
    DEFAULT_MASS
}
fn d_dt() -> f64 {
    DEFAULT_DT
}
fn d_substeps() -> usize {
    DEFAULT_SUBSTEPS
}
fn d_cap() -> f64 {
    DEFAULT_ACTION_CAP
}

/// Dynamics file: initial particles plus model parameters. Edges default to
/// a chain through the particles in order, rest lengths from the initial
/// shape. Particles are in the same frame as the flow they will track;
/// `camera_pose` records the world pose of that frame when it is a camera.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsSpec {
    pub particles: Vec<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edges: Option<Vec<Edge>>,
    #[serde(default = "d_stiffness")]
    pub stiffness: f64,
    #[serde(default = "d_damping")]
    pub damping: f64,
    #[serde(default = "d_mass")]
    pub mass: f64,
    #[serde(default = "d_dt")]
    pub dt: f64,
    #[serde(default = "d_substeps")]
    pub substeps: usize,
    #[serde(default)]
    pub ground_height: Option<f64>,
    #[serde(default)]
    pub gravity: bool,
    #[serde(default)]
    pub attachment: Vec<usize>,
    #[serde(default)]
    pub fixed: Vec<usize>,
    #[serde(default = "d_cap")]
    pub action_cap: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub camera_pose: Option<SE3Pose>,
}

impl DynamicsSpec {
    pub fn from_model(model: &MassSpringModel, state: &ParticleState) -> Self {
        Self {
            particles: state.positions.iter().map(|p| [p.x, p.y, p.z]).collect(),
            edges: Some(model.edges.clone()),
            stiffness: model.stiffness,
            damping: model.damping,
            mass: model.mass,
            dt: model.dt,
            substeps: model.substeps,
            ground_height: model.ground_height,
            gravity: model.gravity,
            attachment: model.attachment.clone(),
            fixed: model.fixed.clone(),
            action_cap: model.action_cap,
            camera_pose: None,
        }
    }

    pub fn build(&self) -> Result<(MassSpringModel, ParticleState), DeformableError> {
        let positions: Vec<Vec3> = self.particles.iter().map(|p| Vec3::from(*p)).collect();
        let mut model = MassSpringModel::chain(&positions);
        if let Some(e) = &self.edges {
            model.edges = e.clone();
        }
        model.stiffness = self.stiffness;
        model.damping = self.damping;
        model.mass = self.mass;
        model.dt = self.dt;
        model.substeps = self.substeps;
        model.ground_height = self.ground_height;
        model.gravity = self.gravity;
        model.attachment = self.attachment.clone();
        model.fixed = self.fixed.clone();
        model.action_cap = self.action_cap;
        model.validate()?;
        Ok((model, ParticleState::at_rest(positions)))
    }
}

impl RolloutLog {
    /// Rollout log JSON; particle snapshots every `snapshot_every` steps
    /// (0 disables them).
    pub fn to_json(&self, snapshot_every: usize) -> serde_json::Value {
        let snapshots: Vec<serde_json::Value> = if snapshot_every == 0 {
            Vec::new()
        } else {
            self.states
                .iter()
                .enumerate()
                .filter(|(t, _)| t % snapshot_every == 0)
                .map(|(t, s)| {
                    serde_json::json!({
                        "t": t,
                        "positions": s.positions.iter().map(|p| [p.x, p.y, p.z]).collect::<Vec<_>>(),
                    })
                })
                .collect()
        };
        serde_json::json!({
            "actions": self.actions.iter().map(|a| [a.delta.x, a.delta.y, a.delta.z]).collect::<Vec<_>>(),
            "step_costs": self.step_costs,
            "initial_cost": self.initial_cost,
            "final_cost": self.final_cost,
            "snapshots": snapshots,
        })
    }

    pub fn costs_csv(&self) -> String {
        let mut out = String::from("t,flow_cost\n");
        for (t, c) in self.step_costs.iter().enumerate() {
            out.push_str(&format!("{},{c:.8e}\n", t + 1));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dynamics_spec_defaults_and_round_trip() {
        let spec: DynamicsSpec =
            serde_json::from_str(r#"{"particles":[[0,0,0],[0.1,0,0],[0.2,0,0]],"attachment":[2]}"#)
                .unwrap();
        let (m, s) = spec.build().unwrap();
        assert_eq!(m.edges.len(), 2);
        assert_eq!(m.stiffness, DEFAULT_STIFFNESS);
        assert_eq!(m.attachment, vec![2]);
        assert_eq!(s.len(), 3);
        let back = DynamicsSpec::from_model(&m, &s);
        assert_eq!(back.build().unwrap().0, m);
        let bad: DynamicsSpec =
            serde_json::from_str(r#"{"particles":[[0,0,0],[0,0,0.1]],"attachment":[5]}"#).unwrap();
        assert!(bad.build().is_err());
    }
}
