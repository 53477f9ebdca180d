//! One-dimensional search over the power dual `v`.
//!
//! For an activated block (first `k_s` cascaded paths, first `k_i` direct
//! paths), every stationary point is parameterized by `v`: direct powers
//! follow water-filling, and each cascaded power is a root of the per-path
//! cubic. The budget residual is scanned on a grid of `v` and every sign
//! change is refined by bisection, so returned points satisfy the budget to
//! machine precision.

use crate::asymptotic::{rate_value, Allocation, AsymptoticProblem, Solution};
use crate::error::Result;

use super::cubic::cubic_roots;
use super::waterfill::water_filling;

/// Grid resolution and acceptance tolerance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSearchConfig {
    /// Absolute grid step; `None` uses `(b_u - b_l) / divisions` per block.
    pub s_grid: Option<f64>,
    pub divisions: usize,
    /// Relative budget residual accepted for an unrefined grid point.
    pub eps_acc: f64,
}

impl Default for GridSearchConfig {
    fn default() -> Self {
        Self {
            s_grid: None,
            divisions: 2000,
            eps_acc: 1e-3,
        }
    }
}

/// Search interval for `v` given the activated index sets.
///
/// With no activated direct path the direct terms drop out of both bounds.
pub fn search_bounds(s_active: &[usize], i_active: &[usize], m_r: &[f64], m_d: &[f64], power: f64) -> (f64, f64) {
    let inv_d: f64 = i_active.iter().map(|&i| 1.0 / m_d[i]).sum();
    let inv_r: f64 = s_active.iter().map(|&s| 1.0 / m_r[s]).sum();
    let n_i = i_active.len() as f64;
    let n_s = s_active.len() as f64;
    let lower = (n_i / (power + inv_d)).max(0.5 / power);
    let mut upper = (n_i + n_s) / (power + inv_d + inv_r);
    if let Some(weakest) = i_active.iter().map(|&i| m_d[i]).reduce(f64::min) {
        upper = upper.min(weakest);
    }
    (lower, upper)
}

/// Cascaded roots at one `v`: the large root (always admissible when the
/// cubic has three real roots) and the small root when admissible.
#[derive(Debug, Clone)]
struct PointRoots {
    p_d: Vec<f64>,
    p_r_total: f64,
    large: Vec<Option<f64>>,
    small: Vec<Option<f64>>,
}

fn point_roots(problem: &AsymptoticProblem, k_s: usize, k_i: usize, v: f64) -> Option<PointRoots> {
    let p_d: Vec<f64> = problem.m_d()[..k_i].iter().map(|&m| 1.0 / v - 1.0 / m).collect();
    if p_d.iter().any(|&p| p <= 0.0) {
        return None;
    }
    let p_r_total = problem.power() - p_d.iter().sum::<f64>();
    if p_r_total <= 0.0 {
        return None;
    }
    let fold = 2.0 / (3.0 * v);
    let mut large = Vec::with_capacity(k_s);
    let mut small = Vec::with_capacity(k_s);
    for &m in &problem.m_r()[..k_s] {
        let roots = cubic_roots(v, p_r_total, m);
        let positive: Vec<_> = roots.iter().filter(|r| r.value > 0.0).collect();
        if positive.len() == 2 {
            large.push(Some(positive[1].value));
            small.push(if positive[0].valid && positive[0].value < fold {
                Some(positive[0].value)
            } else {
                None
            });
        } else {
            large.push(None);
            small.push(None);
        }
    }
    Some(PointRoots {
        p_d,
        p_r_total,
        large,
        small,
    })
}

/// Cascaded powers for branch mask `combo` (bit set = small root).
fn combo_powers(roots: &PointRoots, combo: usize) -> Option<Vec<f64>> {
    (0..roots.large.len())
        .map(|s| {
            if combo >> s & 1 == 1 {
                roots.small[s]
            } else {
                roots.large[s]
            }
        })
        .collect()
}

fn combo_residual(problem: &AsymptoticProblem, k_s: usize, k_i: usize, combo: usize, v: f64) -> Option<f64> {
    let roots = point_roots(problem, k_s, k_i, v)?;
    let p = combo_powers(&roots, combo)?;
    Some(p.iter().sum::<f64>() - roots.p_r_total)
}

/// Bisects a sign change of `f` on `[lo, hi]`; `None` if `f` leaves its domain.
fn bisect_root(f: impl Fn(f64) -> Option<f64>, mut lo: f64, mut hi: f64, mut f_lo: f64) -> Option<f64> {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid)?;
        if f_mid == 0.0 {
            return Some(mid);
        }
        if (f_mid < 0.0) == (f_lo < 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    let (r_lo, r_hi) = (f(lo), f(hi));
    match (r_lo, r_hi) {
        (Some(a), Some(b)) => Some(if a.abs() <= b.abs() { lo } else { hi }),
        (Some(_), None) => Some(lo),
        (None, Some(_)) => Some(hi),
        (None, None) => None,
    }
}

/// Last point inside the domain of `f` between `inside` and `outside`.
fn domain_edge(f: impl Fn(f64) -> Option<f64>, mut inside: f64, mut outside: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (inside + outside);
        if mid == inside || mid == outside {
            break;
        }
        if f(mid).is_some() {
            inside = mid;
        } else {
            outside = mid;
        }
    }
    inside
}

fn assemble(problem: &AsymptoticProblem, k_s: usize, k_i: usize, combo: usize, v: f64) -> Option<Solution> {
    let roots = point_roots(problem, k_s, k_i, v)?;
    let p = combo_powers(&roots, combo)?;
    let sum_p: f64 = p.iter().sum();
    let mut alloc = Allocation::zeros(problem.s(), problem.l3());
    alloc.p_r[..k_s].copy_from_slice(&p);
    alloc.p_d[..k_i].copy_from_slice(&roots.p_d);
    for s in 0..k_s {
        alloc.t[s] = p[s] / sum_p;
    }
    let rate = rate_value(problem, &alloc);
    Some(Solution {
        allocation: alloc,
        v,
        w: 2.0 * v * roots.p_r_total,
        s_active: (0..k_s).collect(),
        i_active: (0..k_i).collect(),
        rate,
    })
}

/// Stationary points of one `(k_s, k_i)` block found on the grid.
fn search_block(problem: &AsymptoticProblem, k_s: usize, k_i: usize, cfg: &GridSearchConfig) -> Vec<Solution> {
    let s_active: Vec<usize> = (0..k_s).collect();
    let i_active: Vec<usize> = (0..k_i).collect();
    let (lo, hi) = search_bounds(&s_active, &i_active, problem.m_r(), problem.m_d(), problem.power());
    if !(hi > lo) {
        return Vec::new();
    }
    let step = cfg.s_grid.unwrap_or((hi - lo) / cfg.divisions.max(1) as f64);
    let n = ((hi - lo) / step).ceil().max(1.0) as usize;
    let grid: Vec<f64> = (0..=n).map(|j| (lo + j as f64 * step).min(hi)).collect();
    let points: Vec<Option<PointRoots>> = grid.iter().map(|&v| point_roots(problem, k_s, k_i, v)).collect();
    let combos = 1usize << k_s;
    let tol = cfg.eps_acc * problem.power();

    let mut refined = Vec::new();
    let mut raw = Vec::new();
    for combo in 0..combos {
        let residual = |v: f64| combo_residual(problem, k_s, k_i, combo, v);
        let values: Vec<Option<f64>> = points
            .iter()
            .map(|pt| {
                pt.as_ref()
                    .and_then(|r| combo_powers(r, combo).map(|p| p.iter().sum::<f64>() - r.p_r_total))
            })
            .collect();
        for j in 0..grid.len() {
            if let Some(r) = values[j] {
                if r.abs() < tol {
                    raw.push((combo, grid[j]));
                }
            }
            if j + 1 == grid.len() {
                continue;
            }
            let (a, b) = (grid[j], grid[j + 1]);
            match (values[j], values[j + 1]) {
                (Some(ra), Some(rb)) => {
                    if ra == 0.0 {
                        refined.push((combo, a));
                    } else if (ra < 0.0) != (rb < 0.0) && rb != 0.0 {
                        if let Some(v) = bisect_root(residual, a, b, ra) {
                            refined.push((combo, v));
                        }
                    }
                }
                (Some(ra), None) => {
                    let edge = domain_edge(residual, a, b);
                    if let Some(re) = residual(edge) {
                        if (ra < 0.0) != (re < 0.0) {
                            if let Some(v) = bisect_root(residual, a, edge, ra) {
                                refined.push((combo, v));
                            }
                        } else if re.abs() <= 1e-12 * problem.power() {
                            refined.push((combo, edge));
                        }
                    }
                }
                (None, Some(rb)) => {
                    let edge = domain_edge(residual, b, a);
                    if let Some(re) = residual(edge) {
                        if (re < 0.0) != (rb < 0.0) {
                            if let Some(v) = bisect_root(residual, edge, b, re) {
                                refined.push((combo, v));
                            }
                        } else if re.abs() <= 1e-12 * problem.power() {
                            refined.push((combo, edge));
                        }
                    }
                }
                (None, None) => {}
            }
        }
        if let Some(r) = values[grid.len() - 1] {
            if r == 0.0 {
                refined.push((combo, grid[grid.len() - 1]));
            }
        }
    }
    let chosen = if refined.is_empty() { raw } else { refined };
    chosen
        .into_iter()
        .filter_map(|(combo, v)| assemble(problem, k_s, k_i, combo, v))
        .collect()
}

/// Operating point with only the strongest cascaded path reflected (`t = [1, 0, ...]`),
/// direct and cascaded powers water-filled jointly.
pub fn single_path_solution(problem: &AsymptoticProblem) -> Result<Solution> {
    let mut gains = vec![problem.m_r()[0]];
    gains.extend_from_slice(problem.m_d());
    let (p, v) = water_filling(&gains, problem.power())?;
    let mut alloc = Allocation::zeros(problem.s(), problem.l3());
    alloc.p_r[0] = p[0];
    alloc.p_d.copy_from_slice(&p[1..]);
    alloc.t[0] = 1.0;
    let rate = rate_value(problem, &alloc);
    Ok(Solution {
        v,
        w: 2.0 * v * p[0],
        s_active: if p[0] > 0.0 { vec![0] } else { Vec::new() },
        i_active: (0..problem.l3()).filter(|&i| alloc.p_d[i] > 0.0).collect(),
        allocation: alloc,
        rate,
    })
}

/// `true` when `a` should replace `b` as the incumbent.
pub(crate) fn better(a: &Solution, b: &Solution) -> bool {
    if a.rate > b.rate + 1e-12 * b.rate.abs().max(1.0) {
        return true;
    }
    if a.rate < b.rate - 1e-12 * b.rate.abs().max(1.0) {
        return false;
    }
    (a.s_active.len(), a.i_active.len()) < (b.s_active.len(), b.i_active.len())
}

/// Best stationary point over all activated blocks, seeded with the
/// single-path water-filling solution.
pub fn grid_search(problem: &AsymptoticProblem, cfg: &GridSearchConfig) -> Result<Solution> {
    let mut best = single_path_solution(problem)?;
    for k_s in 2..=problem.s() {
        for k_i in 0..=problem.l3() {
            for candidate in search_block(problem, k_s, k_i, cfg) {
                if better(&candidate, &best) {
                    best = candidate;
                }
            }
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asymptotic::rate;

    #[test]
    fn bound_examples() {
        let (lo, _) = search_bounds(&[0, 1], &[0], &[4.0, 4.0], &[1.0], 1.0);
        assert!((lo - 0.5).abs() < 1e-15);
        let (_, hi) = search_bounds(&[0, 1], &[0], &[4.0, 4.0], &[1.0], 1.0);
        assert!((hi - 1.0).abs() < 1e-15);
        let (lo, _) = search_bounds(&[0, 1], &[0], &[4.0, 4.0], &[1.0], 1e12);
        assert!(lo < 1e-11);
    }

    #[test]
    fn single_cascaded_path() {
        let prob = AsymptoticProblem::new(vec![7.0], vec![], 2.0).unwrap();
        let sol = grid_search(&prob, &GridSearchConfig::default()).unwrap();
        assert_eq!(sol.allocation.p_r, vec![2.0]);
        assert_eq!(sol.allocation.t, vec![1.0]);
        assert!((sol.rate - 15f64.log2()).abs() < 1e-12);
    }

    #[test]
    fn dead_cascaded_channel_falls_back_to_direct_waterfilling() {
        let prob = AsymptoticProblem::new(vec![1e-9, 1e-10], vec![50.0, 20.0], 1.0).unwrap();
        let sol = grid_search(&prob, &GridSearchConfig::default()).unwrap();
        let (p, _) = water_filling(&[50.0, 20.0], 1.0).unwrap();
        assert!(sol.allocation.p_r.iter().all(|&x| x == 0.0));
        assert!((sol.allocation.p_d[0] - p[0]).abs() < 1e-12);
        assert!((sol.allocation.p_d[1] - p[1]).abs() < 1e-12);
        assert!(sol.s_active.is_empty());
    }

    #[test]
    fn equal_paths_high_power_spread_evenly() {
        let prob = AsymptoticProblem::new(vec![50.0; 3], vec![], 100.0).unwrap();
        let sol = grid_search(&prob, &GridSearchConfig::default()).unwrap();
        assert_eq!(sol.s_active.len(), 3);
        for &t in &sol.allocation.t {
            assert!((t - 1.0 / 3.0).abs() < 1e-9);
        }
        rate(&prob, &sol.allocation).unwrap();
    }

    #[test]
    fn budget_is_met_exactly() {
        let prob = AsymptoticProblem::new(vec![120.0, 90.0, 40.0], vec![30.0, 8.0], 1.0).unwrap();
        let sol = grid_search(&prob, &GridSearchConfig::default()).unwrap();
        assert!((sol.allocation.total_power() - 1.0).abs() < 1e-10);
        rate(&prob, &sol.allocation).unwrap();
    }

    #[test]
    fn deterministic() {
        let prob = AsymptoticProblem::new(vec![80.0, 70.0, 20.0], vec![25.0], 2.0).unwrap();
        let a = grid_search(&prob, &GridSearchConfig::default()).unwrap();
        let b = grid_search(&prob, &GridSearchConfig::default()).unwrap();
        assert_eq!(a, b);
    }
}
