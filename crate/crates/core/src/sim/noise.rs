use rand::Rng;

use super::{gaussian, stream_rng, streams, SimError};
use crate::flow::ActionableFlow;
use crate::geometry::Vec3;

/// I.i.d. Gaussian offsets of `sigma` per coordinate; each keypoint is
/// dropped with probability `dropout`, from every frame at once.
pub fn corrupt_flow(flow: &ActionableFlow, sigma: f64, dropout: f64, seed: u64) -> Result<ActionableFlow, SimError> {
    if !(sigma >= 0.0) || !(0.0..=1.0).contains(&dropout) {
        return Err(SimError::InvalidConfig(format!(
            "corruption needs sigma >= 0 and dropout in [0, 1], got {sigma} and {dropout}"
        )));
    }
    let mut rng = stream_rng(seed, streams::CORRUPT);
    let keep: Vec<usize> = (0..flow.keypoints)
        .filter(|_| dropout == 0.0 || rng.random_range(0.0..1.0) >= dropout)
        .collect();
    if keep.len() < 3 {
        return Err(SimError::TooFewKeypoints(keep.len()));
    }
    let kept = flow.select_keypoints(&keep)?;
    if sigma == 0.0 {
        return Ok(kept);
    }
    let noisy = kept
        .positions()
        .iter()
        .map(|p| p + Vec3::new(gaussian(&mut rng), gaussian(&mut rng), gaussian(&mut rng)) * sigma)
        .collect();
    Ok(ActionableFlow::new(kept.frames, kept.keypoints, noisy, kept.label)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_flow(frames: usize, k: usize) -> ActionableFlow {
        let pts = (0..frames)
            .flat_map(|t| (0..k).map(move |i| Vec3::new(i as f64 * 0.01, 0.0, 1.0 + 0.01 * t as f64)))
            .collect();
        ActionableFlow::new(frames, k, pts, "line").unwrap()
    }

    #[test]
    fn clean_corruption_is_identity() {
        let f = line_flow(5, 10);
        assert_eq!(corrupt_flow(&f, 0.0, 0.0, 9).unwrap(), f);
    }

    #[test]
    fn dropout_is_consistent_across_frames() {
        let f = line_flow(4, 10);
        // find a seed that leaves exactly three survivors
        let (seed, c) = (0..500)
            .find_map(|s| match corrupt_flow(&f, 0.0, 0.7, s) {
                Ok(c) if c.keypoints == 3 => Some((s, c)),
                _ => None,
            })
            .unwrap();
        let first: Vec<f64> = c.frame(0).iter().map(|p| p.x).collect();
        for t in 0..4 {
            let xs: Vec<f64> = c.frame(t).iter().map(|p| p.x).collect();
            assert_eq!(xs, first);
        }
        assert_eq!(corrupt_flow(&f, 0.0, 0.7, seed).unwrap(), c);
        assert!(matches!(corrupt_flow(&f, 0.0, 1.0, 0), Err(SimError::TooFewKeypoints(0))));
    }

    #[test]
    fn noise_matches_sigma() {
        // oracle: sample std within 5% and a two-sided chi-square check at 1%
        let f = line_flow(100, 334);
        let sigma = 0.003;
        let c = corrupt_flow(&f, sigma, 0.0, 42).unwrap();
        let resid: Vec<f64> = c
            .positions()
            .iter()
            .zip(f.positions())
            .flat_map(|(a, b)| (a - b).iter().copied().collect::<Vec<_>>())
            .collect();
        let n = resid.len() as f64;
        assert!(n >= 1e5);
        let mean = resid.iter().sum::<f64>() / n;
        let std = (resid.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((std / sigma - 1.0).abs() < 0.05, "std {std}");
        let chi2: f64 = resid.iter().map(|r| (r / sigma) * (r / sigma)).sum();
        let z = (chi2 - n) / (2.0 * n).sqrt();
        assert!(z.abs() < 2.576, "z {z}");
        assert_ne!(corrupt_flow(&f, sigma, 0.0, 43).unwrap(), c);
    }
}
