use serde::{Deserialize, Serialize};

use super::DeformableError;
use crate::geometry::Vec3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParticleState {
    pub positions: Vec<Vec3>,
    pub velocities: Vec<Vec3>,
}

impl ParticleState {
    /// Particles at rest at the given positions.
    pub fn at_rest(positions: Vec<Vec3>) -> Self {
        let velocities = vec![Vec3::zeros(); positions.len()];
        Self {
            positions,
            velocities,
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.positions
            .iter()
            .chain(&self.velocities)
            .all(|p| p.iter().all(|c| c.is_finite()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub rest_length: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GripperAction {
    pub delta: Vec3,
}

impl GripperAction {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self {
            delta: Vec3::new(x, y, z),
        }
    }

    /// Scales the displacement down to at most `cap`.
    pub fn clamped(self, cap: f64) -> Self {
        let n = self.delta.norm();
        if n > cap && n > 0.0 {
            Self {
                delta: self.delta * (cap / n),
            }
        } else {
            self
        }
    }
}

/// Particles joined by damped linear springs, stepped with semi-implicit
/// Euler. Attached particles follow the gripper kinematically; fixed ones
/// never move.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MassSpringModel {
    pub n_particles: usize,
    pub edges: Vec<Edge>,
    pub stiffness: f64,
    pub damping: f64,
    pub mass: f64,
    pub dt: f64,
    pub substeps: usize,
    pub ground_height: Option<f64>,
    pub gravity: bool,
    pub attachment: Vec<usize>,
    #[serde(default)]
    pub fixed: Vec<usize>,
    pub action_cap: f64,
}

pub const DEFAULT_STIFFNESS: f64 = 500.0;
pub const DEFAULT_DAMPING: f64 = 1.0;
pub const DEFAULT_MASS: f64 = 0.01;
pub const DEFAULT_DT: f64 = 1.0 / 16.0;
pub const DEFAULT_SUBSTEPS: usize = 20;
pub const DEFAULT_ACTION_CAP: f64 = 0.05;

impl MassSpringModel {
    /// A chain through `positions` in order, rest lengths from the given
    /// shape, default parameters and no attachment.
    pub fn chain(positions: &[Vec3]) -> Self {
        let edges = positions
            .windows(2)
            .enumerate()
            .map(|(i, w)| Edge {
                i,
                j: i + 1,
                rest_length: (w[1] - w[0]).norm(),
            })
            .collect();
        Self {
            n_particles: positions.len(),
            edges,
            stiffness: DEFAULT_STIFFNESS,
            damping: DEFAULT_DAMPING,
            mass: DEFAULT_MASS,
            dt: DEFAULT_DT,
            substeps: DEFAULT_SUBSTEPS,
            ground_height: None,
            gravity: false,
            attachment: Vec::new(),
            fixed: Vec::new(),
            action_cap: DEFAULT_ACTION_CAP,
        }
    }

    pub fn validate(&self) -> Result<(), DeformableError> {
        let bad = |s: String| Err(DeformableError::InvalidModel(s));
        if self.n_particles < 2 {
            return bad("need at least 2 particles".into());
        }
        if !(self.stiffness > 0.0 && self.mass > 0.0 && self.dt > 0.0 && self.damping >= 0.0)
            || self.substeps == 0
        {
            return bad(
                "stiffness, mass, dt and substeps must be positive and damping non-negative".into(),
            );
        }
        if !(self.action_cap > 0.0) {
            return bad("action_cap must be positive".into());
        }
        for e in &self.edges {
            if e.i >= self.n_particles
                || e.j >= self.n_particles
                || e.i == e.j
                || !(e.rest_length > 0.0)
            {
                return bad(format!("invalid edge {e:?}"));
            }
        }
        if let Some(i) = self
            .attachment
            .iter()
            .chain(&self.fixed)
            .find(|&&i| i >= self.n_particles)
        {
            return bad(format!("particle index {i} out of range"));
        }
        Ok(())
    }

    /// Advances one flow step. The action is clamped to `action_cap`.
    pub fn step(
        &self,
        state: &ParticleState,
        action: &GripperAction,
    ) -> Result<ParticleState, DeformableError> {
        let mut out = state.clone();
        self.step_in_place(&mut out, action)?;
        Ok(out)
    }

    pub fn step_in_place(
        &self,
        state: &mut ParticleState,
        action: &GripperAction,
    ) -> Result<(), DeformableError> {
        let n = self.n_particles;
        if state.positions.len() != n || state.velocities.len() != n {
            return Err(DeformableError::SizeMismatch {
                expected: n,
                got: state.positions.len(),
            });
        }
        let delta = action.clamped(self.action_cap).delta;
        let h = self.dt / self.substeps as f64;
        let per_sub = delta / self.substeps as f64;
        let grip_velocity = delta / self.dt;
        let mut pinned = vec![false; n];
        for &i in self.attachment.iter().chain(&self.fixed) {
            pinned[i] = true;
        }
        let mut force = vec![Vec3::zeros(); n];
        for _ in 0..self.substeps {
            for f in force.iter_mut() {
                *f = Vec3::zeros();
            }
            for e in &self.edges {
                let d = state.positions[e.j] - state.positions[e.i];
                let len = d.norm();
                if !(len > 1e-12) || !len.is_finite() {
                    return Err(DeformableError::DegenerateEdge { i: e.i, j: e.j });
                }
                let f = d * (self.stiffness * (len - e.rest_length) / len);
                force[e.i] += f;
                force[e.j] -= f;
            }
            for i in 0..n {
                if pinned[i] {
                    continue;
                }
                let mut f = force[i] - state.velocities[i] * self.damping;
                if self.gravity {
                    f.z -= 9.81 * self.mass;
                }
                state.velocities[i] += f * (h / self.mass);
                state.positions[i] += state.velocities[i] * h;
                if let Some(g) = self.ground_height {
                    if state.positions[i].z < g {
                        state.positions[i].z = g;
                        state.velocities[i].z = state.velocities[i].z.max(0.0);
                    }
                }
            }
            for &i in &self.attachment {
                state.positions[i] += per_sub;
                state.velocities[i] = grip_velocity;
            }
            for &i in &self.fixed {
                state.velocities[i] = Vec3::zeros();
            }
        }
        Ok(())
    }

    /// Spring potential plus kinetic energy.
    pub fn energy(&self, state: &ParticleState) -> f64 {
        let pot: f64 = self
            .edges
            .iter()
            .map(|e| {
                let ext = (state.positions[e.j] - state.positions[e.i]).norm() - e.rest_length;
                0.5 * self.stiffness * ext * ext
            })
            .sum();
        let kin: f64 = state
            .velocities
            .iter()
            .map(|v| 0.5 * self.mass * v.norm_squared())
            .sum();
        pot + kin
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(n: usize, spacing: f64) -> Vec<Vec3> {
        (0..n)
            .map(|i| Vec3::new(i as f64 * spacing, 0.0, 0.0))
            .collect()
    }

    #[test]
    fn equilibrium_is_a_fixed_point() {
        let pts = line(6, 0.05);
        let m = MassSpringModel::chain(&pts);
        let s = ParticleState::at_rest(pts);
        let next = m.step(&s, &GripperAction::default()).unwrap();
        assert_eq!(next, s);
    }

    #[test]
    fn attached_particle_follows_gripper_exactly() {
        let pts = line(4, 0.05);
        let mut m = MassSpringModel::chain(&pts);
        m.attachment = vec![3];
        let s = ParticleState::at_rest(pts.clone());
        let next = m.step(&s, &GripperAction::new(0.01, 0.0, 0.0)).unwrap();
        assert!((next.positions[3] - (pts[3] + Vec3::new(0.01, 0.0, 0.0))).norm() < 1e-15);
    }

    #[test]
    fn actions_are_capped() {
        let pts = line(3, 0.05);
        let mut m = MassSpringModel::chain(&pts);
        m.attachment = vec![0];
        let next = m
            .step(
                &ParticleState::at_rest(pts.clone()),
                &GripperAction::new(1.0, 0.0, 0.0),
            )
            .unwrap();
        assert!((next.positions[0].x - pts[0].x - m.action_cap).abs() < 1e-12);
    }

    #[test]
    fn energy_drift_is_small() {
        // oracle: conserved energy of the undamped oscillator; k is chosen so
        // the per-substep phase advance h·ω stays small
        let mut m = MassSpringModel::chain(&line(2, 1.0));
        m.stiffness = 10.0;
        m.damping = 0.0;
        m.dt = 1e-3;
        m.substeps = 10;
        let mut s = ParticleState::at_rest(vec![Vec3::zeros(), Vec3::new(1.1, 0.0, 0.0)]);
        let e0 = m.energy(&s);
        for _ in 0..1000 {
            m.step_in_place(&mut s, &GripperAction::default()).unwrap();
            assert!((m.energy(&s) - e0).abs() < 0.01 * e0);
        }
    }

    #[test]
    fn ground_contact_and_gravity() {
        let mut m = MassSpringModel::chain(&line(2, 0.1));
        m.gravity = true;
        m.ground_height = Some(0.0);
        let mut s = ParticleState::at_rest(line(2, 0.1));
        for _ in 0..10 {
            m.step_in_place(&mut s, &GripperAction::default()).unwrap();
        }
        assert!(s.positions.iter().all(|p| p.z >= 0.0));
        assert!(s.velocities.iter().all(|v| v.z >= 0.0));
    }

    #[test]
    fn fixed_particles_stay_put() {
        let pts = line(3, 0.05);
        let mut m = MassSpringModel::chain(&pts);
        m.fixed = vec![0];
        m.attachment = vec![2];
        let mut s = ParticleState::at_rest(pts.clone());
        for _ in 0..5 {
            m.step_in_place(&mut s, &GripperAction::new(0.02, 0.01, 0.0))
                .unwrap();
        }
        assert_eq!(s.positions[0], pts[0]);
    }

    #[test]
    fn coincident_particles_are_a_degenerate_edge() {
        let pts = line(2, 0.1);
        let m = MassSpringModel::chain(&pts);
        let s = ParticleState::at_rest(vec![Vec3::zeros(), Vec3::zeros()]);
        let err = m.step(&s, &GripperAction::default()).unwrap_err();
        assert!(err.to_string().contains("degenerate edge"));
    }
}
