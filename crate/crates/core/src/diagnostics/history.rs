use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fits with a slope above this are flagged as slower than `k^{-1/2}`.
pub const RATE_SLOPE_THRESHOLD: f64 = -0.45;

const MONOTONE_REL_TOL: f64 = 1e-12;

/// Indices `k` with `h[k+1] > h[k] (1 + 1e-12)`.
pub fn check_fejer(history: &[f64]) -> Result<Vec<usize>> {
    check_fejer_above(history, 0.0)
}

/// As [`check_fejer`], ignoring steps whose endpoint is at or below `floor`.
///
/// Iterations that converge to round-off jitter around the floor; those
/// wiggles are not violations.
pub fn check_fejer_above(history: &[f64], floor: f64) -> Result<Vec<usize>> {
    if history.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "monotonicity check needs at least 3 entries, got {}",
            history.len()
        )));
    }
    Ok(history
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[1] > floor && w[1] > w[0] * (1.0 + MONOTONE_REL_TOL))
        .map(|(k, _)| k)
        .collect())
}

/// Same contract as [`check_fejer`], applied to a residual history.
pub fn check_residual_monotone(history: &[f64]) -> Result<Vec<usize>> {
    check_fejer(history)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub points: usize,
    /// Slope above [`RATE_SLOPE_THRESHOLD`].
    pub flagged: bool,
}

/// Least-squares slope of `log h[k]` against `log k` over the tail half.
pub fn fit_rate(history: &[f64]) -> Result<RateFit> {
    if history.len() < 20 {
        return Err(Error::InsufficientData(format!(
            "rate fit needs at least 20 entries, got {}",
            history.len()
        )));
    }
    let n = history.len();
    fit_rate_window(history, (n / 2).max(1), n - 1)
}

/// Least-squares slope of `log h[k]` against `log k` for `k_lo <= k <= k_hi`.
pub fn fit_rate_window(history: &[f64], k_lo: usize, k_hi: usize) -> Result<RateFit> {
    let lo = k_lo.max(1);
    let hi = k_hi.min(history.len().saturating_sub(1));
    let pts: Vec<(f64, f64)> = (lo..=hi)
        .filter(|&k| history[k] > 0.0 && history[k].is_finite())
        .map(|k| ((k as f64).ln(), history[k].ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "rate window [{lo}, {hi}] has {} usable points",
            pts.len()
        )));
    }
    let (slope, intercept) = line_fit(&pts);
    Ok(RateFit {
        slope,
        intercept,
        points: pts.len(),
        flagged: slope > RATE_SLOPE_THRESHOLD,
    })
}

fn line_fit(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (slope, my - slope * mx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn strictly_decreasing_has_no_violations() {
        let h: Vec<f64> = (0..10).map(|k| 1.0 / (k as f64 + 1.0)).collect();
        assert!(check_fejer(&h).unwrap().is_empty());
        assert!(check_residual_monotone(&h).unwrap().is_empty());
    }

    #[test]
    fn increase_is_reported_by_index() {
        let h = [3.0, 2.0, 2.5, 1.0];
        assert_eq!(check_fejer(&h).unwrap(), vec![1]);
    }

    #[test]
    fn floor_masks_roundoff_jitter() {
        let h = [1.0, 1e-3, 1e-14, 2e-14, 1e-14];
        assert_eq!(check_fejer(&h).unwrap(), vec![2]);
        assert!(check_fejer_above(&h, 1e-12).unwrap().is_empty());
    }

    #[test]
    fn short_histories_rejected() {
        assert!(check_fejer(&[1.0, 0.5]).is_err());
        assert!(fit_rate(&[1.0; 19]).is_err());
    }

    #[test]
    fn inverse_sqrt_history_has_slope_minus_half() {
        let h: Vec<f64> = (0..200).map(|k| 1.0 / (k.max(1) as f64).sqrt()).collect();
        let fit = fit_rate(&h).unwrap();
        assert!((fit.slope + 0.5).abs() < 1e-6);
        assert!(!fit.flagged);
    }

    #[test]
    fn constant_history_is_flagged() {
        let fit = fit_rate(&[2.0; 40]).unwrap();
        assert!(fit.slope.abs() < 1e-12);
        assert!(fit.flagged);
    }

    #[test]
    fn window_fit_uses_requested_range() {
        let mut h: Vec<f64> = (0..100).map(|k| 1.0 / (k.max(1) as f64)).collect();
        h[90] = 1e3;
        let fit = fit_rate_window(&h, 10, 80).unwrap();
        assert!((fit.slope + 1.0).abs() < 1e-10);
        assert_eq!(fit.points, 71);
    }

    proptest! {
        #[test]
        fn power_law_slope_recovered(p in 0.1f64..3.0, c in 0.01f64..100.0) {
            let h: Vec<f64> = (0..60).map(|k| c * (k.max(1) as f64).powf(-p)).collect();
            let fit = fit_rate(&h).unwrap();
            prop_assert!((fit.slope + p).abs() < 1e-9);
        }

        #[test]
        fn nonincreasing_sequences_pass(mut v in proptest::collection::vec(0.0f64..10.0, 3..50)) {
            v.sort_by(|a, b| b.partial_cmp(a).unwrap());
            prop_assert!(check_fejer(&v).unwrap().is_empty());
        }
    }
}
