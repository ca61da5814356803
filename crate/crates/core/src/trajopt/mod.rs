//! Joint-space trajectory optimization between fixed endpoints: a generic
//! Levenberg–Marquardt solver, the smoothness, rest-pose, limit and
//! collision residual blocks, and swept-sphere clearances.

mod costs;
mod lm;
mod obstacle;
mod optimize;

pub use costs::{
    collision_residuals, limit_residuals, rest_residuals, smooth_residuals, sum_squares,
};
pub use lm::{
    forward_difference_jacobian, levenberg_marquardt, LeastSquaresProblem, LmOptions, LmReport,
    ResidualFn,
};
pub use obstacle::{config_distance, signed_distance, swept_clearances, Obstacle};
pub use optimize::{
    audit_clearance, init_trajectory, load_robot, optimize_trajectory, TermCosts, TrajOptProblem,
    TrajOptResult, TrajOptWeights, DEFAULT_DT, DEFAULT_EPS_SAFE, DEFAULT_SWEPT_SAMPLES,
};

use thiserror::Error;

use crate::kinematics::KinematicsError;

#[derive(Debug, Error)]
pub enum TrajOptError {
    #[error("need at least 2 trajectory steps, got {0}")]
    TooFewSteps(usize),
    #[error("non-finite residual (last valid x has {} entries)", last_valid.len())]
    NonFinite { last_valid: Vec<f64> },
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
}
