use crate::asymptotic::{AsymptoticProblem, Solution};

/// First-order optimality residuals at a primal/dual point (natural-log units).
///
/// For each variable `x` with objective gradient `g` and constraint dual `d`
/// (`v` for powers, `w` for surface shares), the nonnegativity multiplier is
/// `lambda = d - g`. Stationarity requires `lambda = 0` when `x > 0`;
/// when `x = 0` it only requires `lambda >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct KktResidual {
    pub stationarity_p_r: Vec<f64>,
    pub stationarity_p_d: Vec<f64>,
    pub stationarity_t: Vec<f64>,
    /// `sum p - P`.
    pub power_violation: f64,
    /// `sum t - 1`.
    pub share_violation: f64,
    /// Most negative primal entry (0 if none).
    pub negativity: f64,
    /// `lambda * x` for every variable.
    pub slackness: Vec<f64>,
    /// Negative part of `v`, `w`.
    pub dual_infeasibility: f64,
}

impl KktResidual {
    pub fn max_stationarity(&self) -> f64 {
        self.stationarity_p_r
            .iter()
            .chain(&self.stationarity_p_d)
            .chain(&self.stationarity_t)
            .fold(0.0, |a, b| a.max(b.abs()))
    }

    /// Largest absolute residual of any kind.
    pub fn max_abs(&self) -> f64 {
        self.slackness
            .iter()
            .fold(self.max_stationarity(), |a, b| a.max(b.abs()))
            .max(self.power_violation.abs())
            .max(self.share_violation.abs())
            .max(self.negativity.abs())
            .max(self.dual_infeasibility)
    }
}

fn entry(x: f64, grad: f64, dual: f64, active_tol: f64) -> (f64, f64) {
    let lambda = dual - grad;
    let stationarity = if x > active_tol {
        grad - dual
    } else {
        (grad - dual).max(0.0)
    };
    (stationarity, lambda * x)
}

/// Evaluates every stationarity, feasibility and slackness condition.
pub fn kkt_residual(problem: &AsymptoticProblem, solution: &Solution) -> KktResidual {
    let a = &solution.allocation;
    let (v, w) = (solution.v, solution.w);
    let p_tol = 1e-12 * problem.power();
    let mut residual = KktResidual {
        stationarity_p_r: Vec::with_capacity(problem.s()),
        stationarity_p_d: Vec::with_capacity(problem.l3()),
        stationarity_t: Vec::with_capacity(problem.s()),
        power_violation: a.total_power() - problem.power(),
        share_violation: a.t.iter().sum::<f64>() - 1.0,
        negativity: a
            .p_r
            .iter()
            .chain(&a.p_d)
            .chain(&a.t)
            .fold(0.0, |acc: f64, &x| acc.min(x)),
        slackness: Vec::new(),
        dual_infeasibility: (-v).max(0.0).max((-w).max(0.0)),
    };
    for s in 0..problem.s() {
        let (m, p, t) = (problem.m_r()[s], a.p_r[s], a.t[s]);
        let denom = 1.0 + m * p * t * t;
        let (st, sl) = entry(p, m * t * t / denom, v, p_tol);
        residual.stationarity_p_r.push(st);
        residual.slackness.push(sl);
        let (st, sl) = entry(t, 2.0 * m * p * t / denom, w, 1e-12);
        residual.stationarity_t.push(st);
        residual.slackness.push(sl);
    }
    for i in 0..problem.l3() {
        let (m, p) = (problem.m_d()[i], a.p_d[i]);
        let (st, sl) = entry(p, m / (1.0 + m * p), v, p_tol);
        residual.stationarity_p_d.push(st);
        residual.slackness.push(sl);
    }
    residual
}
