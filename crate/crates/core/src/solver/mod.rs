//! Solvers for the asymptotic power / surface-share problem.

mod cubic;
mod grid;
mod kkt;
mod lm;
mod p32;
mod waterfill;

use std::fmt;

pub use cubic::{cubic_roots, valid_roots, CubicRoot};
pub use grid::{grid_search, search_bounds, single_path_solution, GridSearchConfig};
pub use kkt::{kkt_residual, KktResidual};
pub use lm::{estimate_duals, lm_search, lm_solve, lm_solve_from, uniform_start, LmConfig, LmReport, LmStatus};
pub use p32::{prefix_candidate, solve_p32, P32Candidate, P32Solution};
pub use waterfill::water_filling;

use crate::asymptotic::{AsymptoticProblem, Solution};
use crate::error::{Error, Result};

/// Label of one surface share in a stationary point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Zero,
    Plus,
    Minus,
}

/// Per-sub-surface labels of a solution.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Pattern(pub Vec<Label>);

impl Pattern {
    /// `Plus` when `t_s >= 1/w`, `Minus` when `0 < t_s < 1/w`, else `Zero`.
    pub fn of(solution: &Solution) -> Self {
        let inv_w = 1.0 / solution.w;
        Pattern(
            solution
                .allocation
                .t
                .iter()
                .map(|&t| match t {
                    t if t <= 0.0 => Label::Zero,
                    t if t >= inv_w * (1.0 - 1e-9) => Label::Plus,
                    _ => Label::Minus,
                })
                .collect(),
        )
    }

    pub fn active(&self) -> usize {
        self.0.iter().filter(|&&l| l != Label::Zero).count()
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let labels: Vec<&str> = self
            .0
            .iter()
            .map(|l| match l {
                Label::Zero => "0",
                Label::Plus => "+",
                Label::Minus => "-",
            })
            .collect();
        write!(f, "t^{{{}}}", labels.join(","))
    }
}

/// Which solver produces the reported solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolverKind {
    Grid,
    Lm,
    /// Grid search, then an LM polish of the winning block.
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub solver: SolverKind,
    pub grid: GridSearchConfig,
    pub lm: LmConfig,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            solver: SolverKind::Grid,
            grid: GridSearchConfig::default(),
            lm: LmConfig::default(),
        }
    }
}

/// Deviation from `t_s = p_s / P^r` over activated paths.
pub fn linear_relation_error(solution: &Solution) -> f64 {
    let p_total = solution.cascaded_power();
    if p_total <= 0.0 {
        return 0.0;
    }
    solution
        .s_active
        .iter()
        .map(|&s| (solution.allocation.t[s] - solution.allocation.p_r[s] / p_total).abs())
        .fold(0.0, f64::max)
}

/// Largest increase along the sorted order in `t` or in `p_r`.
pub fn ordering_violation(solution: &Solution) -> f64 {
    let a = &solution.allocation;
    let worst = |x: &[f64]| x.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    worst(&a.t).max(worst(&a.p_r))
}

/// Distance of each activated share from the nearer root `1/w +- sqrt(1/w^2 - 1/(m p))`.
pub fn pattern_form_error(problem: &AsymptoticProblem, solution: &Solution) -> f64 {
    let inv_w = 1.0 / solution.w;
    solution
        .s_active
        .iter()
        .map(|&s| {
            let m_tilde = problem.m_r()[s] * solution.allocation.p_r[s];
            let disc = (inv_w * inv_w - 1.0 / m_tilde).max(0.0).sqrt();
            let t = solution.allocation.t[s];
            (t - inv_w - disc).abs().min((t - inv_w + disc).abs())
        })
        .fold(0.0, f64::max)
}

/// Top-level solve on an already-paired problem. The structural relations
/// (`t` proportional to `p_r`, non-increasing order) are checked on the result.
pub fn solve(problem: &AsymptoticProblem, options: &SolveOptions) -> Result<Solution> {
    let solution = match options.solver {
        SolverKind::Grid => grid_search(problem, &options.grid)?,
        SolverKind::Lm => lm_search(problem, &options.lm)?,
        SolverKind::Both => {
            let grid = grid_search(problem, &options.grid)?;
            if grid.s_active.is_empty() {
                grid
            } else {
                let report = lm_solve_from(
                    problem,
                    &grid.s_active,
                    &grid.i_active,
                    &grid.allocation,
                    grid.v,
                    grid.w,
                    &options.lm,
                )?;
                if report.converged() && report.solution.rate >= grid.rate - 1e-12 * grid.rate.abs().max(1.0) {
                    report.solution
                } else {
                    grid
                }
            }
        }
    };
    let linear = linear_relation_error(&solution);
    if linear > 1e-6 {
        return Err(Error::Constraint(format!(
            "surface shares deviate from p_r / P^r by {linear}"
        )));
    }
    let order = ordering_violation(&solution);
    if order > 1e-9 {
        return Err(Error::Constraint(format!(
            "allocation is not non-increasing (violation {order})"
        )));
    }
    Ok(solution)
}
