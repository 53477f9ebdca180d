//! Brute-force references for small instances.

use std::f64::consts::{LN_2, PI};

use num_complex::Complex64;

use crate::asymptotic::{
    coefficients_from_gains, rate_value, Allocation, AsymptoticProblem, CoefficientScales, Solution,
};
use crate::error::{Error, Result};
use crate::finite::FiniteEvaluation;
use crate::partition::PairingMatrix;

/// Lattice resolutions: shares move in steps of `1/t_resolution`, powers in
/// steps of `P/p_resolution`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSpec {
    pub t_resolution: usize,
    pub p_resolution: usize,
}

impl GridSpec {
    pub fn new(t_resolution: usize, p_resolution: usize) -> Result<Self> {
        if t_resolution < 8 || p_resolution < 8 {
            return Err(Error::OracleGuard(
                "lattices need at least 8 points per dimension".into(),
            ));
        }
        Ok(Self {
            t_resolution,
            p_resolution,
        })
    }
}

/// Best lattice point of the rate problem.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub rate: f64,
    pub allocation: Allocation,
}

/// All compositions of `total` into `parts` nonnegative integers, lexicographic.
pub fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    fn rec(total: usize, parts: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if parts == 1 {
            prefix.push(total);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for k in 0..=total {
            prefix.push(k);
            rec(total - k, parts - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if parts > 0 {
        rec(total, parts, &mut Vec::new(), &mut out);
    }
    out
}

/// Exact maximizer of `sum_j ln(1 + g_j x_j delta)` over integer `x` summing to `units`.
/// Each term is concave in `x_j`, so taking the best marginal unit each time is optimal.
fn greedy_units(gains: &[f64], units: usize, delta: f64) -> Vec<usize> {
    let mut x = vec![0usize; gains.len()];
    let marginal = |g: f64, k: usize| ((1.0 + g * (k + 1) as f64 * delta) / (1.0 + g * k as f64 * delta)).ln();
    for _ in 0..units {
        let mut best = 0;
        let mut best_gain = f64::NEG_INFINITY;
        for (j, &g) in gains.iter().enumerate() {
            let m = marginal(g, x[j]);
            if m > best_gain {
                best_gain = m;
                best = j;
            }
        }
        x[best] += 1;
    }
    x
}

fn check_guard(problem: &AsymptoticProblem) -> Result<()> {
    if problem.s() > 3 || problem.l3() > 2 {
        return Err(Error::OracleGuard(format!(
            "brute force is limited to S <= 3 and L3 <= 2 (got S = {}, L3 = {})",
            problem.s(),
            problem.l3()
        )));
    }
    Ok(())
}

fn lattice_allocation(problem: &AsymptoticProblem, t_units: &[usize], p_units: &[usize], grid: GridSpec) -> Allocation {
    let s = problem.s();
    let delta = problem.power() / grid.p_resolution as f64;
    Allocation {
        p_r: p_units[..s].iter().map(|&k| k as f64 * delta).collect(),
        p_d: p_units[s..].iter().map(|&k| k as f64 * delta).collect(),
        t: t_units.iter().map(|&k| k as f64 / grid.t_resolution as f64).collect(),
    }
}

/// Maximum of the rate over the share simplex lattice and the power simplex
/// lattice. The power split is maximized exactly for every share node.
pub fn brute_force_p3(problem: &AsymptoticProblem, grid: GridSpec) -> Result<OracleResult> {
    check_guard(problem)?;
    let s = problem.s();
    let delta = problem.power() / grid.p_resolution as f64;
    let mut best: Option<OracleResult> = None;
    for t_units in compositions(grid.t_resolution, s) {
        let gains: Vec<f64> = problem
            .m_r()
            .iter()
            .zip(&t_units)
            .map(|(m, &k)| {
                let t = k as f64 / grid.t_resolution as f64;
                m * t * t
            })
            .chain(problem.m_d().iter().cloned())
            .collect();
        let p_units = greedy_units(&gains, grid.p_resolution, delta);
        let alloc = lattice_allocation(problem, &t_units, &p_units, grid);
        let rate = rate_value(problem, &alloc);
        if best.as_ref().is_none_or(|b| rate > b.rate) {
            best = Some(OracleResult {
                rate,
                allocation: alloc,
            });
        }
    }
    Ok(best.expect("the share lattice is nonempty"))
}

/// Same maximum by enumerating the full joint lattice (small resolutions only).
pub fn brute_force_p3_exhaustive(problem: &AsymptoticProblem, grid: GridSpec) -> Result<OracleResult> {
    check_guard(problem)?;
    let streams = problem.s() + problem.l3();
    let mut best: Option<OracleResult> = None;
    let power_nodes = compositions(grid.p_resolution, streams);
    for t_units in compositions(grid.t_resolution, problem.s()) {
        for p_units in &power_nodes {
            let alloc = lattice_allocation(problem, &t_units, p_units, grid);
            let rate = rate_value(problem, &alloc);
            if best.as_ref().is_none_or(|b| rate > b.rate) {
                best = Some(OracleResult {
                    rate,
                    allocation: alloc,
                });
            }
        }
    }
    Ok(best.expect("lattices are nonempty"))
}

/// Upper bound on how far the lattice optimum can sit below the true optimum:
/// a Lipschitz bound on the rate times the largest per-coordinate rounding step.
pub fn resolution_bound(problem: &AsymptoticProblem, grid: GridSpec) -> f64 {
    let p = problem.power();
    let power_term: f64 =
        problem.m_r().iter().chain(problem.m_d()).map(|m| m * p).sum::<f64>() / grid.p_resolution as f64;
    let share_term: f64 = problem.m_r().iter().map(|m| (m * p).sqrt()).sum::<f64>() / grid.t_resolution as f64;
    (power_term + share_term) / LN_2
}

/// Rate of every injective pairing of size `min(L1, L2)`, best first.
pub fn enumerate_pairings(
    alpha: &[Complex64],
    beta: &[Complex64],
    gamma: &[Complex64],
    scales: CoefficientScales,
    power: f64,
    solver: &dyn Fn(&AsymptoticProblem) -> Result<Solution>,
) -> Result<Vec<(PairingMatrix, f64)>> {
    let (l1, l2) = (alpha.len(), beta.len());
    if l1 == 0 || l2 == 0 {
        return Err(Error::EmptyPathSet);
    }
    if l1.min(l2) > 4 || l1.max(l2) > 8 {
        return Err(Error::OracleGuard(format!(
            "pairing enumeration limited to min(L1, L2) <= 4, got {l1}x{l2}"
        )));
    }
    let size = l1.min(l2);
    let mut table = Vec::new();
    let mut chosen = Vec::with_capacity(size);
    let mut used = vec![false; l1.max(l2)];
    fn rec(size: usize, wide: usize, chosen: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if chosen.len() == size {
            out.push(chosen.clone());
            return;
        }
        for j in 0..wide {
            if !used[j] {
                used[j] = true;
                chosen.push(j);
                rec(size, wide, chosen, used, out);
                chosen.pop();
                used[j] = false;
            }
        }
    }
    let mut maps = Vec::new();
    rec(size, l1.max(l2), &mut chosen, &mut used, &mut maps);
    for map in maps {
        let pairs: Vec<(usize, usize)> = if l1 <= l2 {
            map.iter().enumerate().map(|(u, &v)| (u, v)).collect()
        } else {
            map.iter().enumerate().map(|(v, &u)| (u, v)).collect()
        };
        let pairing = PairingMatrix::from_pairs(l1, l2, &pairs)?;
        let problem = coefficients_from_gains(alpha, beta, gamma, &pairing, scales, power)?;
        let solution = solver(&problem)?;
        table.push((pairing, solution.rate));
    }
    table.sort_by(|a, b| b.1.total_cmp(&a.1));
    Ok(table)
}

/// Global grid optimum over the common phases for at most two sub-surfaces.
/// Each phase ranges over `grid_points` equally spaced values starting at its current value.
pub fn exhaustive_psi(evaluation: &FiniteEvaluation, grid_points: usize) -> Result<(Vec<f64>, f64)> {
    let start = evaluation.common_phases().to_vec();
    if start.len() > 2 {
        return Err(Error::OracleGuard(format!(
            "exhaustive phase search limited to S <= 2, got {}",
            start.len()
        )));
    }
    let g = grid_points.max(1);
    let step = 2.0 * PI / g as f64;
    let mut best_psi = start.clone();
    let mut best = evaluation.rate_at(&start);
    let total = g.pow(start.len() as u32);
    for idx in 1..total {
        let psi: Vec<f64> = (0..start.len())
            .map(|s| start[s] + step * ((idx / g.pow(s as u32)) % g) as f64)
            .collect();
        let r = evaluation.rate_at(&psi);
        if r > best {
            best = r;
            best_psi = psi;
        }
    }
    Ok((best_psi, best))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{solve, SolveOptions};

    #[test]
    fn composition_counts() {
        assert_eq!(compositions(4, 1), vec![vec![4]]);
        assert_eq!(compositions(3, 2).len(), 4);
        assert_eq!(compositions(10, 3).len(), 66);
        assert!(compositions(5, 3).iter().all(|c| c.iter().sum::<usize>() == 5));
    }

    #[test]
    fn grid_spec_guard() {
        assert!(GridSpec::new(7, 100).is_err());
        assert!(GridSpec::new(8, 8).is_ok());
    }

    #[test]
    fn single_path() {
        let prob = AsymptoticProblem::new(vec![6.0], vec![], 2.0).unwrap();
        let r = brute_force_p3(&prob, GridSpec::new(10, 10).unwrap()).unwrap();
        assert!((r.rate - 13f64.log2()).abs() < 1e-12);
        assert_eq!(r.allocation.t, vec![1.0]);
    }

    #[test]
    fn symmetric_pair() {
        let prob = AsymptoticProblem::new(vec![40.0, 40.0], vec![], 2.0).unwrap();
        let r = brute_force_p3(&prob, GridSpec::new(20, 40).unwrap()).unwrap();
        assert_eq!(r.allocation.t, vec![0.5, 0.5]);
    }

    #[test]
    fn greedy_matches_exhaustive() {
        let cases = [
            (vec![30.0, 12.0], vec![5.0]),
            (vec![8.0, 7.0, 1.0], vec![]),
            (vec![50.0], vec![20.0, 3.0]),
            (vec![3.0, 2.5], vec![9.0, 0.5]),
        ];
        for (m_r, m_d) in cases {
            let prob = AsymptoticProblem::new(m_r, m_d, 1.5).unwrap();
            let grid = GridSpec::new(12, 12).unwrap();
            let a = brute_force_p3(&prob, grid).unwrap();
            let b = brute_force_p3_exhaustive(&prob, grid).unwrap();
            assert!((a.rate - b.rate).abs() < 1e-12, "{} vs {}", a.rate, b.rate);
        }
    }

    #[test]
    fn guard_rejects_large_instances() {
        let prob = AsymptoticProblem::new(vec![1.0; 4], vec![], 1.0).unwrap();
        assert!(matches!(
            brute_force_p3(&prob, GridSpec::new(8, 8).unwrap()),
            Err(Error::OracleGuard(_))
        ));
        let prob = AsymptoticProblem::new(vec![1.0], vec![1.0; 3], 1.0).unwrap();
        assert!(brute_force_p3(&prob, GridSpec::new(8, 8).unwrap()).is_err());
    }

    #[test]
    fn pairing_table_examples() {
        let c = |x: f64| Complex64::new(x, 0.0);
        let scales = CoefficientScales {
            cascaded: 10.0,
            direct: 1.0,
        };
        let solver = |p: &AsymptoticProblem| solve(p, &SolveOptions::default());
        let table = enumerate_pairings(&[c(1.0)], &[c(1.0)], &[], scales, 1.0, &solver).unwrap();
        assert_eq!(table.len(), 1);

        let table = enumerate_pairings(&[c(2.0), c(1.0)], &[c(1.5), c(0.5)], &[c(0.3)], scales, 1.0, &solver).unwrap();
        assert_eq!(table.len(), 2);
        let sorted = crate::asymptotic::optimal_pairing(2, 2);
        let sorted_rate = table.iter().find(|(p, _)| *p == sorted).unwrap().1;
        assert!(sorted_rate >= table[0].1 - 1e-9);

        let table = enumerate_pairings(&[c(1.0); 2], &[c(1.0); 3], &[], scales, 1.0, &solver).unwrap();
        assert_eq!(table.len(), 6);
    }
}
