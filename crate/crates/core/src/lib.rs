// NaN-rejecting guards are written as `!(x > 0.0)` on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod deformable;
pub mod flow;
pub mod geometry;
pub mod kinematics;
pub mod pipeline;
pub mod pnm;
pub mod rigid;
pub mod sim;
pub mod trajopt;
