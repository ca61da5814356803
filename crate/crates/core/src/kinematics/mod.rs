//! Serial-chain robot model: forward kinematics, geometric Jacobian and
//! damped-least-squares inverse kinematics.

mod ik;
mod model;

pub use ik::{solve_ik, IkOptions, IkSolution};
pub use model::{CollisionSphere, Joint, JointConfig, RobotModel};

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum KinematicsError {
    #[error("joint vector has {got} entries, robot has {expected} joints")]
    SizeMismatch { expected: usize, got: usize },
    #[error("IK unreachable (best residual {residual:.3e})")]
    Unreachable { residual: f64 },
    #[error("invalid robot model: {0}")]
    InvalidModel(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Joint configurations sampled every `dt` seconds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointTrajectory {
    pub configs: Vec<JointConfig>,
    pub dt: f64,
}

impl JointTrajectory {
    pub fn len(&self) -> usize {
        self.configs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.configs.is_empty()
    }

    /// CSV with header `t,q0,…` and nine significant digits.
    pub fn to_csv(&self) -> String {
        let n = self.configs.first().map_or(0, |c| c.len());
        let mut out = String::from("t");
        for j in 0..n {
            let _ = write!(out, ",q{j}");
        }
        out.push('\n');
        for (i, q) in self.configs.iter().enumerate() {
            let _ = write!(out, "{:.8e}", i as f64 * self.dt);
            for v in q.iter() {
                let _ = write!(out, ",{v:.8e}");
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    #[test]
    fn csv_layout() {
        let traj = JointTrajectory {
            configs: vec![
                DVector::from_row_slice(&[0.0, 1.0]),
                DVector::from_row_slice(&[0.5, -1.0]),
            ],
            dt: 0.1,
        };
        let csv = traj.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "t,q0,q1");
        assert_eq!(lines[2], "1.00000000e-1,5.00000000e-1,-1.00000000e0");
    }
}
