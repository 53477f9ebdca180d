use crate::error::{Error, Result};

/// Water-filling over parallel channels with gains `m`: `p_i = max(0, 1/v - 1/m_i)`
/// with the water level `1/v` chosen so that `sum p = budget`.
///
/// Returns the powers (in the input order) and the dual `v`. Channels with
/// zero gain never receive power.
pub fn water_filling(m: &[f64], budget: f64) -> Result<(Vec<f64>, f64)> {
    if m.is_empty() {
        return Err(Error::InvalidInput("water-filling needs at least one channel".into()));
    }
    if !(budget >= 0.0 && budget.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "budget {budget} must be finite and nonnegative"
        )));
    }
    if m.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
        return Err(Error::InvalidInput(
            "channel gains must be finite and nonnegative".into(),
        ));
    }
    let mut order: Vec<usize> = (0..m.len()).filter(|&i| m[i] > 0.0).collect();
    if order.is_empty() {
        return Err(Error::InvalidInput("all channel gains are zero".into()));
    }
    order.sort_by(|&a, &b| m[b].total_cmp(&m[a]));

    // largest active set whose water level stays above every active floor
    let mut inv_sum = 0.0;
    let mut level = 0.0;
    let mut active = 0;
    for (k, &i) in order.iter().enumerate() {
        let candidate_sum = inv_sum + 1.0 / m[i];
        let candidate_level = (budget + candidate_sum) / (k + 1) as f64;
        if k > 0 && candidate_level <= 1.0 / m[i] {
            break;
        }
        inv_sum = candidate_sum;
        level = candidate_level;
        active = k + 1;
    }
    // p_i = (budget + sum_j (1/m_j - 1/m_i)) / k avoids cancelling two large
    // reciprocals when the budget is small
    let active_set = &order[..active];
    let mut p = vec![0.0; m.len()];
    for &i in active_set {
        let spread: f64 = active_set.iter().map(|&j| 1.0 / m[j] - 1.0 / m[i]).sum();
        p[i] = ((budget + spread) / active as f64).max(0.0);
    }
    let total: f64 = active_set.iter().map(|&i| p[i]).sum();
    if total > 0.0 {
        let scale = budget / total;
        active_set.iter().for_each(|&i| p[i] *= scale);
    }
    Ok((p, 1.0 / level))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        let (p, v) = water_filling(&[2.0], 1.0).unwrap();
        assert_eq!(p, vec![1.0]);
        assert!((v - 2.0 / 3.0).abs() < 1e-15);

        let (p, _) = water_filling(&[1.0, 1.0], 2.0).unwrap();
        assert_eq!(p, vec![1.0, 1.0]);

        let (p, v) = water_filling(&[4.0, 1.0], 1.0).unwrap();
        assert!((p[0] - 0.875).abs() < 1e-15 && (p[1] - 0.125).abs() < 1e-15);
        assert!((v - 8.0 / 9.0).abs() < 1e-15);

        let (p, _) = water_filling(&[10.0, 0.5], 0.1).unwrap();
        assert_eq!(p, vec![0.1, 0.0]);

        assert!(water_filling(&[], 1.0).is_err());
        assert!(water_filling(&[0.0], 1.0).is_err());
    }

    #[test]
    fn zero_budget() {
        let (p, v) = water_filling(&[3.0, 1.0], 0.0).unwrap();
        assert_eq!(p, vec![0.0, 0.0]);
        assert!((v - 3.0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn budget_and_slackness(m in prop::collection::vec(1e-3f64..1e3, 1..8), budget in 1e-3f64..1e2) {
            let (p, v) = water_filling(&m, budget).unwrap();
            let total: f64 = p.iter().sum();
            prop_assert!((total - budget).abs() <= 1e-12 * budget);
            for (pi, mi) in p.iter().zip(&m) {
                prop_assert!(*pi >= 0.0);
                // active channels sit on the water level, inactive ones are above it
                if *pi > 0.0 {
                    prop_assert!((pi + 1.0 / mi - 1.0 / v).abs() <= 1e-12 * (1.0 / v));
                } else {
                    prop_assert!(1.0 / mi >= 1.0 / v * (1.0 - 1e-12));
                }
            }
        }
    }
}
