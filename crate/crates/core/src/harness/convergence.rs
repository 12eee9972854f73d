/// First episode at which training has plateaued, or `None`.
///
/// Rewards are smoothed with a trailing moving average of `window` episodes
/// (shorter at the start). Episode `t` qualifies when every later smoothed
/// value stays within `tol * range` of the smoothed value at `t`, where
/// `range` spans all smoothed values, and at least `window` episodes
/// (including `t`) remain to confirm it.
pub fn detect_convergence(rewards: &[f64], window: usize, tol: f64) -> Option<usize> {
    let window = window.max(1);
    let n = rewards.len();
    if n < window {
        return None;
    }
    let smoothed = trailing_mean(rewards, window);
    let (lo, hi) = smoothed
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let band = tol * (hi - lo);

    let mut suffix_max = vec![f64::NEG_INFINITY; n + 1];
    let mut suffix_min = vec![f64::INFINITY; n + 1];
    for t in (0..n).rev() {
        suffix_max[t] = suffix_max[t + 1].max(smoothed[t]);
        suffix_min[t] = suffix_min[t + 1].min(smoothed[t]);
    }
    (0..=n - window).find(|&t| {
        suffix_max[t] - smoothed[t] <= band && smoothed[t] - suffix_min[t] <= band
    })
}

fn trailing_mean(values: &[f64], window: usize) -> Vec<f64> {
    (0..values.len())
        .map(|t| {
            let start = (t + 1).saturating_sub(window);
            values[start..=t].iter().sum::<f64>() / (t + 1 - start) as f64
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Literal scan: recompute each window mean from scratch and compare every
    /// pair explicitly.
    fn brute_force(rewards: &[f64], window: usize, tol: f64) -> Option<usize> {
        let n = rewards.len();
        let smooth = |t: usize| -> f64 {
            let start = (t + 1).saturating_sub(window);
            rewards[start..=t].iter().sum::<f64>() / (t + 1 - start) as f64
        };
        let all: Vec<f64> = (0..n).map(smooth).collect();
        let range = all.iter().cloned().fold(f64::MIN, f64::max) - all.iter().cloned().fold(f64::MAX, f64::min);
        for t in 0..n {
            if t + window > n {
                break;
            }
            if (t..n).all(|u| (all[u] - all[t]).abs() <= tol * range) {
                return Some(t);
            }
        }
        None
    }

    #[test]
    fn constant_converges_immediately() {
        assert_eq!(detect_convergence(&[3.0; 100], 25, 0.02), Some(0));
    }

    #[test]
    fn linear_ramp_never_converges() {
        let r: Vec<f64> = (0..300).map(|i| i as f64).collect();
        assert_eq!(detect_convergence(&r, 25, 0.02), None);
        assert_eq!(brute_force(&r, 25, 0.02), None);
    }

    #[test]
    fn ramp_then_flat_detected_after_ramp() {
        let ramp = 150;
        let r: Vec<f64> = (0..400)
            .map(|i| if i < ramp { i as f64 / ramp as f64 } else { 1.0 })
            .collect();
        let got = detect_convergence(&r, 25, 0.02).expect("plateau");
        assert_eq!(Some(got), brute_force(&r, 25, 0.02));
        assert!((ramp..=ramp + 25).contains(&got), "{got}");
    }

    #[test]
    fn too_short_is_none() {
        assert_eq!(detect_convergence(&[1.0; 10], 25, 0.02), None);
        assert_eq!(detect_convergence(&[], 25, 0.02), None);
    }

    proptest::proptest! {
        #[test]
        fn matches_brute_force(r in proptest::collection::vec(-5.0f64..5.0, 0..120), window in 1usize..30, tol in 0.0f64..0.5) {
            proptest::prop_assert_eq!(detect_convergence(&r, window, tol), brute_force(&r, window, tol));
        }
    }
}
