//! Surface-share subproblem at fixed cascaded powers.
//!
//! Maximizes `sum_s ln(1 + m~_s t_s^2)` over the simplex, where
//! `m~_s = m_s p_s`. Only the prefix patterns `[+, ..., +, 0, ..., 0]` can be
//! optimal, so the candidates are indexed by the number `k` of leading
//! plus-labels (`k = 1` is `t = [1, 0, ..., 0]`).

/// One prefix-pattern stationary point.
#[derive(Debug, Clone, PartialEq)]
pub struct P32Candidate {
    /// Number of leading plus-labelled entries.
    pub k: usize,
    pub t: Vec<f64>,
    /// Dual of `sum t = 1`.
    pub w: f64,
    /// `sum_s ln(1 + m~_s t_s^2)` (natural log).
    pub objective: f64,
}

/// Solution of the subproblem together with every existing candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct P32Solution {
    pub t: Vec<f64>,
    pub w: f64,
    pub k: usize,
    pub candidates: Vec<P32Candidate>,
}

fn plus_sum(m_tilde: &[f64], w: f64) -> f64 {
    let inv = 1.0 / w;
    m_tilde
        .iter()
        .map(|&m| inv + (inv * inv - 1.0 / m).max(0.0).sqrt())
        .sum()
}

/// Existence test and bisection for the `k`-prefix all-plus pattern.
pub fn prefix_candidate(m_tilde: &[f64], k: usize) -> Option<P32Candidate> {
    assert!(k >= 1 && k <= m_tilde.len(), "prefix length out of range");
    if k == 1 {
        // t = [1, 0, ...] is always feasible; its dual follows from stationarity
        let m = m_tilde[0];
        let mut t = vec![0.0; m_tilde.len()];
        t[0] = 1.0;
        return Some(P32Candidate {
            k,
            t,
            w: 2.0 * m / (1.0 + m),
            objective: m.ln_1p(),
        });
    }
    let head = &m_tilde[..k];
    let w_max = head.iter().cloned().fold(f64::INFINITY, f64::min).sqrt();
    if !(w_max > 0.0) || plus_sum(head, w_max) > 1.0 {
        return None;
    }
    // plus_sum decreases from +inf at 0 to <= 1 at w_max
    let (mut lo, mut hi) = (0.0, w_max);
    while hi - lo > 1e-12 * hi.max(1e-300) {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if plus_sum(head, mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let w = hi;
    let inv = 1.0 / w;
    let mut t: Vec<f64> = head
        .iter()
        .map(|&m| inv + (inv * inv - 1.0 / m).max(0.0).sqrt())
        .collect();
    let sum: f64 = t.iter().sum();
    t.iter_mut().for_each(|x| *x /= sum);
    t.resize(m_tilde.len(), 0.0);
    let objective = m_tilde.iter().zip(&t).map(|(m, x)| (m * x * x).ln_1p()).sum();
    Some(P32Candidate { k, t, w, objective })
}

/// Best prefix pattern for `m~` sorted non-increasing; ties favor smaller `k`.
pub fn solve_p32(m_tilde: &[f64]) -> P32Solution {
    assert!(!m_tilde.is_empty(), "need at least one coefficient");
    let candidates: Vec<P32Candidate> = (1..=m_tilde.len())
        .filter_map(|k| prefix_candidate(m_tilde, k))
        .collect();
    let best = candidates
        .iter()
        .fold(None::<&P32Candidate>, |best, c| match best {
            Some(b) if c.objective <= b.objective + 1e-12 => Some(b),
            _ => Some(c),
        })
        .expect("the single-path pattern always exists");
    P32Solution {
        t: best.t.clone(),
        w: best.w,
        k: best.k,
        candidates: candidates.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn objective(m: &[f64], t: &[f64]) -> f64 {
        m.iter().zip(t).map(|(m, t)| (m * t * t).ln_1p()).sum()
    }

    #[test]
    fn symmetric_pair_splits_evenly() {
        let sol = solve_p32(&[16.0, 16.0]);
        assert_eq!(sol.k, 2);
        assert!((sol.t[0] - 0.5).abs() < 1e-9 && (sol.t[1] - 0.5).abs() < 1e-9);
        assert!(objective(&[16.0, 16.0], &sol.t) > objective(&[16.0, 16.0], &[1.0, 0.0]));
    }

    #[test]
    fn weak_second_path_gets_nothing() {
        // 2 + sqrt(1 - 2/3) >= sqrt(2): the two-path pattern does not exist
        assert!(prefix_candidate(&[3.0, 2.0], 2).is_none());
        let sol = solve_p32(&[3.0, 2.0]);
        assert_eq!(sol.t, vec![1.0, 0.0]);
    }

    #[test]
    fn single_path_dual() {
        let c = prefix_candidate(&[5.0, 1.0], 1).unwrap();
        assert_eq!(c.t, vec![1.0, 0.0]);
        assert!((c.w - 2.0 * 5.0 / 6.0).abs() < 1e-10);
    }

    #[test]
    fn four_paths_at_eight_db() {
        let snr = 10f64.powf(0.8);
        let m: Vec<f64> = [93.0, 74.0, 54.0, 15.0].iter().map(|x| x * snr).collect();
        let sol = solve_p32(&m);
        assert_eq!(sol.k, 4);
        assert!(sol.t.iter().all(|&t| t > 0.0));
    }

    #[test]
    fn candidates_are_stationary() {
        let m = [40.0, 30.0, 25.0];
        for c in solve_p32(&m).candidates {
            for s in 0..c.k {
                let grad = 2.0 * m[s] * c.t[s] / (1.0 + m[s] * c.t[s] * c.t[s]);
                assert!((grad - c.w).abs() < 1e-9 * c.w, "k={} s={s}", c.k);
            }
            assert!((c.t.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
