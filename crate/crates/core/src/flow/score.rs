use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ActionableFlow, FlowCandidate, FlowError};
use crate::geometry::CameraIntrinsics;

/// Weights of the heuristic plausibility judge.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreConfig {
    pub w_jump: f64,
    pub w_spread: f64,
    pub w_teleport: f64,
    /// Largest plausible per-frame keypoint displacement (m).
    pub jump_cap: f64,
    /// Fraction of the image the frame-0 bounding box may cover for free.
    pub compactness: f64,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        Self {
            w_jump: 1.0,
            w_spread: 1.0,
            w_teleport: 10.0,
            jump_cap: 0.15,
            compactness: 0.5,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct ScoreBreakdown {
    pub jump: f64,
    pub spread: f64,
    pub teleport: f64,
    pub score: f64,
}

pub fn score_flow(flow: &ActionableFlow, intr: &CameraIntrinsics) -> f64 {
    score_flow_with(flow, intr, &ScoreConfig::default()).score
}

/// Higher is better; a smooth, compact flow scores exactly zero.
///
/// Every term is a mean or an extent, so duplicating keypoints leaves the
/// score unchanged.
pub fn score_flow_with(
    flow: &ActionableFlow,
    intr: &CameraIntrinsics,
    cfg: &ScoreConfig,
) -> ScoreBreakdown {
    let k = flow.keypoints as f64;
    let mut excess_sq = 0.0;
    let mut jumps = 0usize;
    let mut steps = 0usize;
    for t in 0..flow.frames.saturating_sub(1) {
        for i in 0..flow.keypoints {
            let d = (flow.position(t + 1, i) - flow.position(t, i)).norm();
            let over = (d - cfg.jump_cap).max(0.0);
            excess_sq += over * over;
            if d > cfg.jump_cap {
                jumps += 1;
            }
            steps += 1;
        }
    }
    let jump = if steps > 0 {
        excess_sq / steps as f64
    } else {
        0.0
    };
    let teleport = jumps as f64 / k;

    let mut bbox = [
        f64::INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::NEG_INFINITY,
    ];
    for p in flow.frame(0) {
        if let Ok((u, v)) = intr.project(p) {
            let u = u.clamp(0.0, intr.width as f64);
            let v = v.clamp(0.0, intr.height as f64);
            bbox = [
                bbox[0].min(u),
                bbox[1].min(v),
                bbox[2].max(u),
                bbox[3].max(v),
            ];
        }
    }
    let area = if bbox[2] >= bbox[0] {
        (bbox[2] - bbox[0]) * (bbox[3] - bbox[1])
    } else {
        0.0
    };
    let frac = area / (intr.width as f64 * intr.height as f64);
    let spread = (frac - cfg.compactness).max(0.0);

    let score = 0.0 - (cfg.w_jump * jump + cfg.w_spread * spread + cfg.w_teleport * teleport);
    ScoreBreakdown {
        jump,
        spread,
        teleport,
        score,
    }
}

/// Scores candidates in parallel; the output order matches the input order.
pub fn score_candidates(
    flows: Vec<(u32, ActionableFlow)>,
    intr: &CameraIntrinsics,
    cfg: &ScoreConfig,
) -> Vec<FlowCandidate> {
    flows
        .into_par_iter()
        .map(|(id, flow)| {
            let score = score_flow_with(&flow, intr, cfg).score;
            FlowCandidate { id, flow, score }
        })
        .collect()
}

/// Id of the best-scoring candidate; ties go to the lowest id.
pub fn select_candidate(candidates: &[FlowCandidate]) -> Result<u32, FlowError> {
    let key = |c: &FlowCandidate| {
        if c.score.is_nan() {
            f64::NEG_INFINITY
        } else {
            c.score
        }
    };
    candidates
        .iter()
        .fold(None::<&FlowCandidate>, |best, c| match best {
            None => Some(c),
            Some(b) => {
                let (kc, kb) = (key(c), key(b));
                if kc > kb || (kc == kb && c.id < b.id) {
                    Some(c)
                } else {
                    Some(b)
                }
            }
        })
        .map(|c| c.id)
        .ok_or(FlowError::NoCandidates)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec3;

    fn intr() -> CameraIntrinsics {
        CameraIntrinsics::new(500.0, 500.0, 320.0, 240.0, 640, 480).unwrap()
    }

    fn linear_flow(keypoints: usize) -> Vec<Vec<Vec3>> {
        (0..10)
            .map(|t| {
                (0..keypoints)
                    .map(|k| Vec3::new(0.01 * k as f64, 0.005 * k as f64 + 0.01 * t as f64, 1.0))
                    .collect()
            })
            .collect()
    }

    fn cand(id: u32, score: f64) -> FlowCandidate {
        FlowCandidate {
            id,
            flow: ActionableFlow::from_frames(vec![vec![Vec3::new(0.0, 0.0, 1.0)]; 2], "").unwrap(),
            score,
        }
    }

    #[test]
    fn teleport_scores_lower() {
        let smooth = ActionableFlow::from_frames(linear_flow(5), "a").unwrap();
        let mut frames = linear_flow(5);
        frames[4][2].x += 1.0;
        let jumpy = ActionableFlow::from_frames(frames, "a").unwrap();
        assert!(score_flow(&smooth, &intr()) > score_flow(&jumpy, &intr()));
        assert_eq!(score_flow(&smooth, &intr()), 0.0);
    }

    #[test]
    fn spread_scores_lower() {
        let compact = ActionableFlow::from_frames(linear_flow(5), "a").unwrap();
        let wide = ActionableFlow::from_frames(
            vec![vec![Vec3::new(-0.64, -0.48, 1.0), Vec3::new(0.64, 0.48, 1.0)]; 3],
            "a",
        )
        .unwrap();
        assert!(score_flow(&compact, &intr()) > score_flow(&wide, &intr()));
    }

    #[test]
    fn duplicating_keypoints_keeps_score() {
        let mut frames = linear_flow(4);
        frames[3][1].y += 0.5;
        frames[0][0].x -= 0.9;
        let base = ActionableFlow::from_frames(frames.clone(), "a").unwrap();
        let doubled: Vec<Vec<Vec3>> = frames
            .iter()
            .map(|f| f.iter().chain(f.iter()).copied().collect())
            .collect();
        let doubled = ActionableFlow::from_frames(doubled, "a").unwrap();
        let (a, b) = (score_flow(&base, &intr()), score_flow(&doubled, &intr()));
        assert!(a < 0.0);
        assert!((a - b).abs() <= 1e-12 * a.abs());
    }

    #[test]
    fn selection_rules() {
        assert_eq!(select_candidate(&[cand(4, -3.0)]).unwrap(), 4);
        assert_eq!(select_candidate(&[cand(3, 0.1), cand(7, 0.9)]).unwrap(), 7);
        assert_eq!(select_candidate(&[cand(2, 0.5), cand(1, 0.5)]).unwrap(), 1);
        assert_eq!(
            select_candidate(&[cand(1, f64::NAN), cand(2, -1.0)]).unwrap(),
            2
        );
        assert!(select_candidate(&[]).is_err());
    }

    #[test]
    fn selection_invariant_under_monotone_transform() {
        let c = [cand(0, -0.3), cand(1, 0.2), cand(2, -5.0), cand(3, 0.2)];
        let t: Vec<FlowCandidate> = c
            .iter()
            .map(|x| cand(x.id, x.score.exp() * 3.0 + 1.0))
            .collect();
        assert_eq!(select_candidate(&c).unwrap(), select_candidate(&t).unwrap());
    }
}
