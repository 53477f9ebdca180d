use std::f64::consts::PI;

/// One real root of `p^3 - p^2/v + P_r^2/m = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubicRoot {
    pub value: f64,
    /// `p >= max(4 v^2 P_r^2 / m, 1/(2v))`.
    pub valid: bool,
}

fn polish(p: f64, a: f64, c: f64) -> f64 {
    let mut x = p;
    for _ in 0..4 {
        let f = x * x * x - a * x * x + c;
        let df = 3.0 * x * x - 2.0 * a * x;
        if df.abs() < 1e-300 {
            break;
        }
        let next = x - f / df;
        let f_next = next * next * next - a * next * next + c;
        if !next.is_finite() || f_next.abs() >= f.abs() {
            break;
        }
        x = next;
    }
    x
}

/// Real roots of the per-path cubic in ascending order, each flagged valid
/// when it satisfies the power-domain admissibility condition.
pub fn cubic_roots(v: f64, p_r: f64, m: f64) -> Vec<CubicRoot> {
    let a = 1.0 / v;
    let c = p_r * p_r / m;
    let flag = |p: f64| {
        let bound = (4.0 * v * v * c).max(0.5 * a);
        CubicRoot {
            value: p,
            valid: p >= bound * (1.0 - 1e-12),
        }
    };
    let a3 = a * a * a;
    let mut roots = if c <= 4.0 * a3 / 27.0 {
        // three real roots: trigonometric form around p = a/3
        let arg = (1.0 - 13.5 * c / a3).clamp(-1.0, 1.0);
        let phi = arg.acos() / 3.0;
        (0..3)
            .map(|k| a / 3.0 + (2.0 * a / 3.0) * (phi - 2.0 * PI * k as f64 / 3.0).cos())
            .map(|p| polish(p, a, c))
            .collect::<Vec<_>>()
    } else {
        // one real root (negative): Cardano on the depressed cubic
        let pp = -a * a / 3.0;
        let q = c - 2.0 * a3 / 27.0;
        let disc = (q * q / 4.0 + pp * pp * pp / 27.0).max(0.0).sqrt();
        let y = (-q / 2.0 + disc).cbrt() + (-q / 2.0 - disc).cbrt();
        vec![polish(y + a / 3.0, a, c)]
    };
    roots.sort_by(f64::total_cmp);
    roots.into_iter().map(flag).collect()
}

/// Cubic roots that are positive and admissible, ascending.
pub fn valid_roots(v: f64, p_r: f64, m: f64) -> Vec<f64> {
    cubic_roots(v, p_r, m)
        .into_iter()
        .filter(|r| r.valid && r.value > 0.0)
        .map(|r| r.value)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn poly(v: f64, p_r: f64, m: f64, p: f64) -> f64 {
        p * p * p - p * p / v + p_r * p_r / m
    }

    #[test]
    fn zero_constant_term() {
        let roots = cubic_roots(0.5, 0.0, 3.0);
        let vals: Vec<f64> = roots.iter().map(|r| r.value).collect();
        assert_eq!(vals.len(), 3);
        assert!(vals[0].abs() < 1e-12 && vals[1].abs() < 1e-12);
        assert!((vals[2] - 2.0).abs() < 1e-12);
        assert!(roots[2].valid && !roots[0].valid);
    }

    #[test]
    fn validity_reduces_to_half_level() {
        // any root satisfies p >= 4 v^2 P_r^2 / m once p >= 1/(2v)
        let (v, p_r, m) = (1.0, 0.3, 2.0);
        for r in cubic_roots(v, p_r, m) {
            if r.value > 0.0 {
                assert_eq!(r.valid, r.value >= 0.5 / v);
            }
        }
    }

    proptest! {
        #[test]
        fn roots_satisfy_polynomial(v in 1e-2f64..1e2, p_r in 1e-3f64..10.0, m in 1e-2f64..1e4) {
            let roots = cubic_roots(v, p_r, m);
            prop_assert!(roots.len() == 1 || roots.len() == 3);
            let scale = (1.0 / v).powi(3).max(p_r * p_r / m);
            for r in &roots {
                prop_assert!(poly(v, p_r, m, r.value).abs() <= 1e-9 * scale);
            }
            // product of roots is -P_r^2/m < 0, so exactly one negative root
            prop_assert_eq!(roots.iter().filter(|r| r.value < 0.0).count(), 1);
            let positive: Vec<f64> = roots.iter().map(|r| r.value).filter(|&p| p > 0.0).collect();
            if positive.len() == 2 {
                let fold = 2.0 / (3.0 * v);
                prop_assert!(positive[0] <= fold * (1.0 + 1e-9) && positive[1] >= fold * (1.0 - 1e-9));
            }
            for r in &roots {
                let bound = (4.0 * v * v * p_r * p_r / m).max(0.5 / v);
                if r.valid {
                    prop_assert!(r.value >= bound * (1.0 - 1e-9));
                }
            }
        }
    }
}
