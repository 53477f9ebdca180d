//! Stand-alone problem files for `rispart solve`.
//!
//! ```toml
//! m_r = [400.0, 300.0]   # cascaded coefficients
//! m_d = [30.0]           # direct coefficients, may be empty
//! P = 1.0                # power budget, W
//! ```

use std::fmt::Write as _;
use std::path::Path;

use rispart::asymptotic::{AsymptoticProblem, Solution};
use rispart::solver::{solve, Pattern, SolveOptions};
use serde::Deserialize;

use crate::error::{HarnessError, Result};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemFile {
    m_r: Vec<f64>,
    #[serde(default)]
    m_d: Vec<f64>,
    #[serde(rename = "P")]
    power: f64,
}

pub fn parse_problem(text: &str) -> Result<AsymptoticProblem> {
    let file: ProblemFile = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
    AsymptoticProblem::new(file.m_r, file.m_d, file.power).map_err(|e| HarnessError::Config(e.to_string()))
}

pub fn load_problem(path: &Path) -> Result<AsymptoticProblem> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_problem(&text)
}

pub fn solve_problem(problem: &AsymptoticProblem, options: &SolveOptions) -> Result<Solution> {
    Ok(solve(problem, options)?)
}

/// `key = value` report in the sorted coefficient order.
pub fn format_solution(problem: &AsymptoticProblem, solution: &Solution) -> String {
    let list = |v: &[f64]| v.iter().map(|x| format!("{x:.9e}")).collect::<Vec<_>>().join(", ");
    let a = &solution.allocation;
    let mut out = String::new();
    let _ = writeln!(out, "rate = {:.12}", solution.rate);
    let _ = writeln!(out, "pattern = \"{}\"", Pattern::of(solution));
    let _ = writeln!(out, "s_min_star = {}", solution.s_min_star());
    let _ = writeln!(out, "active_cascaded = {:?}", solution.s_active);
    let _ = writeln!(out, "active_direct = {:?}", solution.i_active);
    let _ = writeln!(out, "m_r = [{}]", list(problem.m_r()));
    let _ = writeln!(out, "m_d = [{}]", list(problem.m_d()));
    let _ = writeln!(out, "p_r = [{}]", list(&a.p_r));
    let _ = writeln!(out, "p_d = [{}]", list(&a.p_d));
    let _ = writeln!(out, "t = [{}]", list(&a.t));
    let _ = writeln!(out, "v = {:.12e}", solution.v);
    let _ = writeln!(out, "w = {:.12e}", solution.w);
    out
}
