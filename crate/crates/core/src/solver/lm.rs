//! Levenberg-Marquardt on the stationarity system of an activated block.
//!
//! Unknowns are `(p_r[S_a], p_d[I_a], t[S_a], v, w)`. Powers are normalized
//! by the budget `P` (and `v` multiplied by it) so the residuals are
//! dimensionless:
//!
//! ```text
//! v/m + v p t^2 - t^2          per s in S_a
//! v/m + v p - 1                per i in I_a
//! w (1/m + p t^2) - 2 p t      per s in S_a
//! w t - 2 v p                  per s in S_a
//! sum p - 1
//! sum t - 1
//! ```

use nalgebra::{DMatrix, DVector};

use crate::asymptotic::{rate_value, Allocation, AsymptoticProblem, Solution};
use crate::error::{Error, Result};

use super::grid::{better, single_path_solution};
use super::kkt::{kkt_residual, KktResidual};

/// Stopping and damping parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmConfig {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub stall_limit: usize,
    pub initial_damping: f64,
}

impl Default for LmConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: 500,
            stall_limit: 50,
            initial_damping: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LmStatus {
    Converged,
    IterationLimit,
    Diverged,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmReport {
    pub solution: Solution,
    pub kkt: KktResidual,
    /// Euclidean norm of the normalized system residual.
    pub residual_norm: f64,
    pub iterations: usize,
    pub status: LmStatus,
}

impl LmReport {
    pub fn converged(&self) -> bool {
        self.status == LmStatus::Converged
    }

    /// Every activated share lies on the plus branch, `p >= 1/(2v)`.
    pub fn on_plus_branch(&self) -> bool {
        let sol = &self.solution;
        sol.s_active
            .iter()
            .all(|&s| sol.allocation.p_r[s] * 2.0 * sol.v >= 1.0 - 1e-9)
    }
}

struct System<'a> {
    m_r: Vec<f64>,
    m_d: Vec<f64>,
    problem: &'a AsymptoticProblem,
    s_active: &'a [usize],
    i_active: &'a [usize],
}

impl System<'_> {
    fn ks(&self) -> usize {
        self.m_r.len()
    }

    fn ki(&self) -> usize {
        self.m_d.len()
    }

    fn unknowns(&self) -> usize {
        2 * self.ks() + self.ki() + 2
    }

    fn equations(&self) -> usize {
        3 * self.ks() + self.ki() + 2
    }

    fn split<'b>(&self, z: &'b DVector<f64>) -> (&'b [f64], &'b [f64], &'b [f64], f64, f64) {
        let (ks, ki) = (self.ks(), self.ki());
        let z = z.as_slice();
        (
            &z[..ks],
            &z[ks..ks + ki],
            &z[ks + ki..2 * ks + ki],
            z[2 * ks + ki],
            z[2 * ks + ki + 1],
        )
    }

    fn residual(&self, z: &DVector<f64>) -> DVector<f64> {
        let (pr, pd, t, v, w) = self.split(z);
        let ks = self.ks();
        let ki = self.ki();
        let mut r = DVector::zeros(self.equations());
        for s in 0..ks {
            let m = self.m_r[s];
            r[s] = v / m + v * pr[s] * t[s] * t[s] - t[s] * t[s];
            r[ks + ki + s] = w * (1.0 / m + pr[s] * t[s] * t[s]) - 2.0 * pr[s] * t[s];
            r[2 * ks + ki + s] = w * t[s] - 2.0 * v * pr[s];
        }
        for i in 0..ki {
            let m = self.m_d[i];
            r[ks + i] = v / m + v * pd[i] - 1.0;
        }
        r[3 * ks + ki] = pr.iter().sum::<f64>() + pd.iter().sum::<f64>() - 1.0;
        r[3 * ks + ki + 1] = t.iter().sum::<f64>() - 1.0;
        r
    }

    fn jacobian(&self, z: &DVector<f64>) -> DMatrix<f64> {
        let (pr, pd, t, v, w) = self.split(z);
        let (ks, ki) = (self.ks(), self.ki());
        let (col_t, col_v, col_w) = (ks + ki, 2 * ks + ki, 2 * ks + ki + 1);
        let mut j = DMatrix::zeros(self.equations(), self.unknowns());
        for s in 0..ks {
            let m = self.m_r[s];
            let (p, ts) = (pr[s], t[s]);
            j[(s, s)] = v * ts * ts;
            j[(s, col_t + s)] = 2.0 * v * p * ts - 2.0 * ts;
            j[(s, col_v)] = 1.0 / m + p * ts * ts;

            let row = ks + ki + s;
            j[(row, s)] = w * ts * ts - 2.0 * ts;
            j[(row, col_t + s)] = 2.0 * w * p * ts - 2.0 * p;
            j[(row, col_w)] = 1.0 / m + p * ts * ts;

            let row = 2 * ks + ki + s;
            j[(row, s)] = -2.0 * v;
            j[(row, col_t + s)] = w;
            j[(row, col_v)] = -2.0 * p;
            j[(row, col_w)] = ts;
        }
        for i in 0..ki {
            let m = self.m_d[i];
            j[(ks + i, ks + i)] = v;
            j[(ks + i, col_v)] = 1.0 / m + pd[i];
        }
        let (re, rf) = (3 * ks + ki, 3 * ks + ki + 1);
        for c in 0..ks + ki {
            j[(re, c)] = 1.0;
        }
        for s in 0..ks {
            j[(rf, col_t + s)] = 1.0;
        }
        j
    }

    fn project(&self, z: &mut DVector<f64>) {
        let n = z.len();
        for x in z.iter_mut().take(n - 2) {
            *x = x.max(0.0);
        }
        z[n - 2] = z[n - 2].max(1e-300);
        z[n - 1] = z[n - 1].max(1e-300);
    }

    fn to_solution(&self, z: &DVector<f64>) -> Solution {
        let (pr, pd, t, v, w) = self.split(z);
        let power = self.problem.power();
        let mut alloc = Allocation::zeros(self.problem.s(), self.problem.l3());
        for (k, &s) in self.s_active.iter().enumerate() {
            alloc.p_r[s] = pr[k] * power;
            alloc.t[s] = t[k];
        }
        for (k, &i) in self.i_active.iter().enumerate() {
            alloc.p_d[i] = pd[k] * power;
        }
        let rate = rate_value(self.problem, &alloc);
        Solution {
            allocation: alloc,
            v: v / power,
            w,
            s_active: self.s_active.to_vec(),
            i_active: self.i_active.to_vec(),
            rate,
        }
    }
}

/// Duals consistent with an allocation: averages of the stationarity
/// expressions over the activated entries.
pub fn estimate_duals(
    problem: &AsymptoticProblem,
    s_active: &[usize],
    i_active: &[usize],
    alloc: &Allocation,
) -> (f64, f64) {
    let mut v_sum = 0.0;
    let mut w_sum = 0.0;
    for &s in s_active {
        let (m, p, t) = (problem.m_r()[s], alloc.p_r[s], alloc.t[s]);
        let denom = 1.0 + m * p * t * t;
        v_sum += m * t * t / denom;
        w_sum += 2.0 * m * p * t / denom;
    }
    for &i in i_active {
        let (m, p) = (problem.m_d()[i], alloc.p_d[i]);
        v_sum += m / (1.0 + m * p);
    }
    let v = v_sum / (s_active.len() + i_active.len()).max(1) as f64;
    let w = w_sum / s_active.len().max(1) as f64;
    (v, w)
}

/// LM from an initial allocation; duals are estimated from it.
pub fn lm_solve(
    problem: &AsymptoticProblem,
    s_active: &[usize],
    i_active: &[usize],
    initial: &Allocation,
    cfg: &LmConfig,
) -> Result<LmReport> {
    let (v, w) = estimate_duals(problem, s_active, i_active, initial);
    lm_solve_from(problem, s_active, i_active, initial, v, w, cfg)
}

/// LM from an initial allocation and initial duals.
pub fn lm_solve_from(
    problem: &AsymptoticProblem,
    s_active: &[usize],
    i_active: &[usize],
    initial: &Allocation,
    v0: f64,
    w0: f64,
    cfg: &LmConfig,
) -> Result<LmReport> {
    if s_active.is_empty() {
        return Err(Error::InvalidInput(
            "LM needs at least one activated cascaded path".into(),
        ));
    }
    if s_active.iter().any(|&s| s >= problem.s()) || i_active.iter().any(|&i| i >= problem.l3()) {
        return Err(Error::InvalidInput("activated index out of range".into()));
    }
    let power = problem.power();
    let sys = System {
        m_r: s_active.iter().map(|&s| problem.m_r()[s] * power).collect(),
        m_d: i_active.iter().map(|&i| problem.m_d()[i] * power).collect(),
        problem,
        s_active,
        i_active,
    };
    let mut z = DVector::zeros(sys.unknowns());
    let (ks, ki) = (sys.ks(), sys.ki());
    for (k, &s) in s_active.iter().enumerate() {
        z[k] = initial.p_r[s] / power;
        z[ks + ki + k] = initial.t[s];
    }
    for (k, &i) in i_active.iter().enumerate() {
        z[ks + k] = initial.p_d[i] / power;
    }
    z[2 * ks + ki] = v0 * power;
    z[2 * ks + ki + 1] = w0;
    sys.project(&mut z);

    let mut r = sys.residual(&z);
    let mut cost = r.norm_squared();
    let mut damping = cfg.initial_damping;
    let mut stall = 0;
    let mut iterations = 0;
    let mut status = LmStatus::IterationLimit;
    while iterations < cfg.max_iterations {
        if r.norm() < cfg.tolerance {
            status = LmStatus::Converged;
            break;
        }
        iterations += 1;
        let j = sys.jacobian(&z);
        let jt = j.transpose();
        let jtj = &jt * &j;
        let g = &jt * &r;
        let mut a = jtj.clone();
        for d in 0..a.nrows() {
            a[(d, d)] += damping * jtj[(d, d)].max(1e-12);
        }
        let step = a.lu().solve(&(-g));
        let accepted = match step {
            Some(step) if step.iter().all(|x| x.is_finite()) => {
                let mut trial = &z + step;
                sys.project(&mut trial);
                let r_trial = sys.residual(&trial);
                let c_trial = r_trial.norm_squared();
                if c_trial < cost {
                    z = trial;
                    r = r_trial;
                    cost = c_trial;
                    true
                } else {
                    false
                }
            }
            _ => false,
        };
        if accepted {
            damping = (damping / 10.0).max(1e-15);
            stall = 0;
        } else {
            damping *= 10.0;
            stall += 1;
            if stall >= cfg.stall_limit {
                status = LmStatus::Diverged;
                break;
            }
        }
    }
    if status == LmStatus::IterationLimit && r.norm() < cfg.tolerance {
        status = LmStatus::Converged;
    }
    let solution = sys.to_solution(&z);
    let kkt = kkt_residual(problem, &solution);
    Ok(LmReport {
        solution,
        kkt,
        residual_norm: r.norm(),
        iterations,
        status,
    })
}

/// Uniform starting point for a block: equal powers, equal shares.
pub fn uniform_start(problem: &AsymptoticProblem, s_active: &[usize], i_active: &[usize]) -> Allocation {
    let mut alloc = Allocation::zeros(problem.s(), problem.l3());
    let share = problem.power() / (s_active.len() + i_active.len()) as f64;
    for &s in s_active {
        alloc.p_r[s] = share;
        alloc.t[s] = 1.0 / s_active.len() as f64;
    }
    for &i in i_active {
        alloc.p_d[i] = share;
    }
    alloc
}

/// Cold-started LM over every prefix block, keeping converged plus-branch
/// points, compared against the single-path water-filling solution.
pub fn lm_search(problem: &AsymptoticProblem, cfg: &LmConfig) -> Result<Solution> {
    let mut best = single_path_solution(problem)?;
    for k_s in 2..=problem.s() {
        for k_i in 0..=problem.l3() {
            let s_active: Vec<usize> = (0..k_s).collect();
            let i_active: Vec<usize> = (0..k_i).collect();
            let start = uniform_start(problem, &s_active, &i_active);
            let report = lm_solve(problem, &s_active, &i_active, &start, cfg)?;
            let interior = report.solution.allocation.p_r[..k_s].iter().all(|&p| p > 0.0)
                && report.solution.allocation.p_d[..k_i].iter().all(|&p| p > 0.0);
            if report.converged() && report.on_plus_branch() && interior && better(&report.solution, &best) {
                best = report.solution;
            }
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::grid::{grid_search, GridSearchConfig};

    #[test]
    fn single_path_recovers_full_power() {
        let prob = AsymptoticProblem::new(vec![9.0], vec![], 3.0).unwrap();
        let start = Allocation {
            p_r: vec![3.0],
            p_d: vec![],
            t: vec![1.0],
        };
        let report = lm_solve(&prob, &[0], &[], &start, &LmConfig::default()).unwrap();
        assert!(report.converged());
        assert!((report.solution.allocation.p_r[0] - 3.0).abs() < 1e-12);
        assert!((report.solution.allocation.t[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn warm_start_from_grid_converges_quickly() {
        let prob = AsymptoticProblem::new(vec![150.0, 120.0, 60.0], vec![40.0, 10.0], 1.0).unwrap();
        let grid = grid_search(&prob, &GridSearchConfig::default()).unwrap();
        let report = lm_solve_from(
            &prob,
            &grid.s_active,
            &grid.i_active,
            &grid.allocation,
            grid.v,
            grid.w,
            &LmConfig::default(),
        )
        .unwrap();
        assert!(report.converged());
        assert!(report.iterations <= 5, "{} iterations", report.iterations);
        assert!(report.residual_norm < 1e-10);
        assert!((report.solution.rate - grid.rate).abs() < 1e-9);
    }

    #[test]
    fn cold_search_matches_grid() {
        let prob = AsymptoticProblem::new(vec![300.0, 250.0], vec![20.0], 1.0).unwrap();
        let grid = grid_search(&prob, &GridSearchConfig::default()).unwrap();
        let lm = lm_search(&prob, &LmConfig::default()).unwrap();
        assert!((lm.rate - grid.rate).abs() <= 5e-3 * grid.rate);
    }
}
