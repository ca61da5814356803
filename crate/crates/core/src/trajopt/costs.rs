use super::obstacle::swept_clearances;
use super::Obstacle;
use crate::kinematics::{JointConfig, RobotModel};

/// `√w_s (q_t − q_{t−1})` for every step and joint.
pub fn smooth_residuals(configs: &[JointConfig], w_s: f64) -> Vec<f64> {
    let s = w_s.sqrt();
    configs
        .windows(2)
        .flat_map(|w| (&w[1] - &w[0]).iter().map(|d| s * d).collect::<Vec<_>>())
        .collect()
}

/// `√w_r (q_t − q_rest)` for every configuration and joint.
pub fn rest_residuals(configs: &[JointConfig], q_rest: &JointConfig, w_r: f64) -> Vec<f64> {
    let s = w_r.sqrt();
    configs
        .iter()
        .flat_map(|q| (q - q_rest).iter().map(|d| s * d).collect::<Vec<_>>())
        .collect()
}

/// Position-limit hinges (upper then lower, per configuration and joint)
/// followed by velocity hinges `max(0, |Δq| − v_max dt)` per step and joint.
pub fn limit_residuals(configs: &[JointConfig], model: &RobotModel, w_l: f64, dt: f64) -> Vec<f64> {
    let s = w_l.sqrt();
    let mut out = Vec::with_capacity(configs.len() * model.dof() * 3);
    for q in configs {
        for (j, v) in model.joints.iter().zip(q.iter()) {
            out.push(s * (v - j.q_max).max(0.0));
            out.push(s * (j.q_min - v).max(0.0));
        }
    }
    for w in configs.windows(2) {
        for (k, j) in model.joints.iter().enumerate() {
            out.push(s * ((w[1][k] - w[0][k]).abs() - j.velocity_limit * dt).max(0.0));
        }
    }
    out
}

/// `√w_c max(0, ε − d_s)` per segment and obstacle.
pub fn collision_residuals(
    configs: &[JointConfig],
    model: &RobotModel,
    obstacles: &[Obstacle],
    eps_safe: f64,
    w_c: f64,
    swept_samples: usize,
) -> Vec<f64> {
    let s = w_c.sqrt();
    let mut out = Vec::with_capacity(configs.len().saturating_sub(1) * obstacles.len());
    for w in configs.windows(2) {
        for d in swept_clearances(model, &w[0], &w[1], obstacles, swept_samples) {
            out.push(s * (eps_safe - d).max(0.0));
        }
    }
    out
}

pub fn sum_squares(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}
