//! Distilling an object flow from dense tracks, plus depth calibration,
//! flow images and candidate selection.

mod calibrate;
mod distill;
pub mod io;
mod render;
mod score;
mod types;

pub use calibrate::calibrate_depth;
pub use distill::{
    distill_flow, distill_flow_with, grounded_track_indices, sample_query_grid, DistillOptions,
};
pub use io::{read_flow, write_flow};
pub use render::render_flow_image;
pub use score::{
    score_candidates, score_flow, score_flow_with, select_candidate, ScoreBreakdown, ScoreConfig,
};
pub use types::{ActionableFlow, FlowCandidate, Mask, MaskSequence, TrackSet};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FlowError {
    #[error("empty depth: {0}")]
    EmptyDepth(String),
    #[error("non-positive median depth (reference {reference}, estimated {estimated})")]
    NonPositiveMedian { reference: f64, estimated: f64 },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("object not grounded: no track of '{0}' survived the mask filter")]
    NotGrounded(String),
    #[error("no flow candidates to select from")]
    NoCandidates,
    #[error("not a flow file (bad magic at byte {offset})")]
    NotAFlowFile { offset: usize },
    #[error("unexpected end of file at byte {offset}")]
    UnexpectedEof { offset: usize },
    #[error("malformed file at byte {offset}: {reason}")]
    Malformed { offset: usize, reason: String },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Image(#[from] crate::pnm::PnmError),
}
