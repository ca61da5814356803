use super::FlowError;
use crate::geometry::DepthMap;

/// Rescales an estimated depth sequence so that the median of its first
/// frame matches the median of a trusted reference depth map.
///
/// One global factor is applied to every frame; per-frame factors would
/// break the temporal consistency of anything lifted from the sequence.
pub fn calibrate_depth(
    estimated: &[DepthMap],
    reference_first: &DepthMap,
) -> Result<(Vec<DepthMap>, f64), FlowError> {
    let first = estimated
        .first()
        .ok_or_else(|| FlowError::EmptyDepth("estimated sequence has no frames".into()))?;
    if first.width != reference_first.width || first.height != reference_first.height {
        return Err(FlowError::Shape(format!(
            "reference depth is {}x{}, estimated frame 0 is {}x{}",
            reference_first.width, reference_first.height, first.width, first.height
        )));
    }
    let ref_median = reference_first
        .median()
        .ok_or_else(|| FlowError::EmptyDepth("reference has no valid pixels".into()))?;
    let est_median = first
        .median()
        .ok_or_else(|| FlowError::EmptyDepth("estimated frame 0 has no valid pixels".into()))?;
    if !(ref_median > 0.0) || !(est_median > 0.0) {
        return Err(FlowError::NonPositiveMedian {
            reference: ref_median,
            estimated: est_median,
        });
    }
    let scale = ref_median / est_median;
    Ok((estimated.iter().map(|d| d.scaled(scale)).collect(), scale))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Sort-based median over the valid pixels, independent of the selection path.
    fn sorted_median(d: &DepthMap) -> f64 {
        let mut v: Vec<f64> = d.values.iter().copied().filter(|x| *x > 0.0).collect();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = v.len();
        if n % 2 == 1 {
            v[n / 2]
        } else {
            (v[n / 2 - 1] + v[n / 2]) / 2.0
        }
    }

    #[test]
    fn constant_maps() {
        let est = vec![DepthMap::filled(4, 3, 2.0), DepthMap::filled(4, 3, 4.0)];
        let (cal, s) = calibrate_depth(&est, &DepthMap::filled(4, 3, 1.0)).unwrap();
        assert_eq!(s, 0.5);
        assert!(cal[0].values.iter().all(|v| *v == 1.0));
        assert!(cal[1].values.iter().all(|v| *v == 2.0));
    }

    #[test]
    fn identity_when_equal() {
        let d = DepthMap::new(2, 2, vec![1.0, 2.0, 0.0, 3.0]).unwrap();
        let (_, s) = calibrate_depth(std::slice::from_ref(&d), &d).unwrap();
        assert_eq!(s, 1.0);
    }

    #[test]
    fn median_is_robust_to_outlier() {
        let est = DepthMap::new(3, 2, vec![1.0, 2.0, 3.0, 4.0, 100.0, 0.0]).unwrap();
        let reference = DepthMap::new(3, 2, vec![2.0, 0.0, 4.0, 0.0, 6.0, 0.0]).unwrap();
        assert_eq!(sorted_median(&est), 3.0);
        assert_eq!(sorted_median(&reference), 4.0);
        let (cal, s) = calibrate_depth(std::slice::from_ref(&est), &reference).unwrap();
        assert!((s - 4.0 / 3.0).abs() < 1e-15);
        assert!((sorted_median(&cal[0]) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_pixels_do_not_change_scale() {
        let est = DepthMap::new(2, 2, vec![1.0, 2.0, 3.0, 5.0]).unwrap();
        let reference = DepthMap::new(2, 2, vec![2.0, 2.0, 3.0, 9.0]).unwrap();
        let (_, s1) = calibrate_depth(std::slice::from_ref(&est), &reference).unwrap();
        let pad = |d: &DepthMap| {
            let mut v = d.values.clone();
            v.extend([0.0, 0.0]);
            DepthMap::new(3, 2, v).unwrap()
        };
        let (_, s2) = calibrate_depth(&[pad(&est)], &pad(&reference)).unwrap();
        assert_eq!(s1, s2);
    }

    #[test]
    fn empty_depth_errors() {
        let zero = DepthMap::filled(2, 2, 0.0);
        let one = DepthMap::filled(2, 2, 1.0);
        let err = calibrate_depth(std::slice::from_ref(&zero), &one).unwrap_err();
        assert!(err.to_string().contains("empty depth"));
        assert!(calibrate_depth(std::slice::from_ref(&one), &zero).is_err());
        assert!(calibrate_depth(&[], &one).is_err());
        assert!(calibrate_depth(&[DepthMap::filled(3, 2, 1.0)], &one).is_err());
    }
}
