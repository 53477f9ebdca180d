//! Large-array rate problem: path coefficients, rate function, optimal pairing.

use num_complex::Complex64;

use crate::channel::{ChannelRealization, PathSet, SimulationConfig};
use crate::error::{Error, Result};
use crate::partition::PairingMatrix;

/// Relative tolerance on allocation constraints when evaluating the rate.
pub const CONSTRAINT_TOL: f64 = 1e-9;

/// Effective gains of the paired cascaded paths and of the direct paths.
///
/// Both coefficient vectors are sorted non-increasing; `r_order[s]` is the
/// index (into [`AsymptoticProblem::pairs`] before sorting, i.e. the pairing's
/// row order) of the `s`-th sorted cascaded coefficient, and `d_order[i]`
/// the original direct path index of the `i`-th sorted direct coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticProblem {
    m_r: Vec<f64>,
    m_d: Vec<f64>,
    power: f64,
    s_max: usize,
    pairs: Vec<(usize, usize)>,
    r_order: Vec<usize>,
    d_order: Vec<usize>,
}

fn sorted_order(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    order
}

impl AsymptoticProblem {
    /// Builds a problem from raw coefficients, sorting each vector.
    /// `m_d` may be empty (no direct link).
    pub fn new(m_r: Vec<f64>, m_d: Vec<f64>, power: f64) -> Result<Self> {
        let pairs = (0..m_r.len()).map(|s| (s, s)).collect();
        Self::with_pairs(m_r, m_d, power, pairs, None)
    }

    fn with_pairs(
        m_r: Vec<f64>,
        m_d: Vec<f64>,
        power: f64,
        pairs: Vec<(usize, usize)>,
        s_max: Option<usize>,
    ) -> Result<Self> {
        if m_r.is_empty() {
            return Err(Error::InvalidInput(
                "at least one cascaded coefficient is required".into(),
            ));
        }
        if m_r.iter().chain(&m_d).any(|&m| !(m >= 0.0 && m.is_finite())) {
            return Err(Error::InvalidInput(
                "coefficients must be finite and nonnegative".into(),
            ));
        }
        if !(power > 0.0 && power.is_finite()) {
            return Err(Error::InvalidInput(format!("power budget {power} must be positive")));
        }
        let r_order = sorted_order(&m_r);
        let d_order = sorted_order(&m_d);
        Ok(Self {
            m_r: r_order.iter().map(|&i| m_r[i]).collect(),
            m_d: d_order.iter().map(|&i| m_d[i]).collect(),
            power,
            s_max: s_max.unwrap_or(m_r.len()),
            pairs: r_order.iter().map(|&i| pairs[i]).collect(),
            r_order,
            d_order,
        })
    }

    pub fn m_r(&self) -> &[f64] {
        &self.m_r
    }

    pub fn m_d(&self) -> &[f64] {
        &self.m_d
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    /// `min(L1, L2)` for problems built from a channel, else the pair count.
    pub fn s_max(&self) -> usize {
        self.s_max
    }

    /// Number of paired cascaded paths.
    pub fn s(&self) -> usize {
        self.m_r.len()
    }

    /// Number of direct paths.
    pub fn l3(&self) -> usize {
        self.m_d.len()
    }

    /// Physical `(u, v)` path pair of each sorted cascaded coefficient.
    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn r_order(&self) -> &[usize] {
        &self.r_order
    }

    pub fn d_order(&self) -> &[usize] {
        &self.d_order
    }

    /// Same problem with a different power budget.
    pub fn with_power(&self, power: f64) -> Result<Self> {
        if !(power > 0.0 && power.is_finite()) {
            return Err(Error::InvalidInput(format!("power budget {power} must be positive")));
        }
        Ok(Self { power, ..self.clone() })
    }
}

/// Scale factors turning squared path-gain magnitudes into coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefficientScales {
    /// `PL_r * M_t * M_r * N^2 / (L1 * L2 * sigma^2)`.
    pub cascaded: f64,
    /// `PL_d * M_t * M_r / (L3 * sigma^2)`.
    pub direct: f64,
}

impl CoefficientScales {
    pub fn from_config(config: &SimulationConfig) -> Self {
        let pl = config.path_loss();
        let mm = (config.m_t * config.m_r) as f64;
        let n = (config.nx * config.ny) as f64;
        Self {
            cascaded: pl.cascaded * mm * n * n / ((config.l1 * config.l2) as f64 * config.noise_power),
            direct: if config.l3 == 0 {
                0.0
            } else {
                pl.direct * mm / (config.l3 as f64 * config.noise_power)
            },
        }
    }
}

/// Coefficients from raw path gains for an arbitrary pairing.
pub fn coefficients_from_gains(
    alpha: &[Complex64],
    beta: &[Complex64],
    gamma: &[Complex64],
    pairing: &PairingMatrix,
    scales: CoefficientScales,
    power: f64,
) -> Result<AsymptoticProblem> {
    if pairing.rows() != alpha.len() || pairing.cols() != beta.len() {
        return Err(Error::Pairing(format!(
            "pairing is {}x{}, paths are {}x{}",
            pairing.rows(),
            pairing.cols(),
            alpha.len(),
            beta.len()
        )));
    }
    let pairs = pairing.pairs();
    if pairs.is_empty() {
        return Err(Error::Pairing("pairing has no paired path".into()));
    }
    let m_r = pairs
        .iter()
        .map(|&(u, v)| scales.cascaded * (alpha[u] * beta[v]).norm_sqr())
        .collect();
    let m_d = gamma.iter().map(|g| scales.direct * g.norm_sqr()).collect();
    AsymptoticProblem::with_pairs(m_r, m_d, power, pairs, Some(alpha.len().min(beta.len())))
}

/// Coefficients from the path sets of one realization.
pub fn coefficients_from_paths(
    tx_ris: &PathSet,
    ris_rx: &PathSet,
    tx_rx: Option<&PathSet>,
    pairing: &PairingMatrix,
    config: &SimulationConfig,
) -> Result<AsymptoticProblem> {
    let gamma = tx_rx.map(|p| p.gains()).unwrap_or(&[]);
    coefficients_from_gains(
        tx_ris.gains(),
        ris_rx.gains(),
        gamma,
        pairing,
        CoefficientScales::from_config(config),
        config.transmit_power,
    )
}

/// Coefficients of a sampled realization.
pub fn coefficients(
    realization: &ChannelRealization,
    pairing: &PairingMatrix,
    config: &SimulationConfig,
) -> Result<AsymptoticProblem> {
    coefficients_from_paths(
        &realization.tx_ris,
        &realization.ris_rx,
        realization.tx_rx.as_ref(),
        pairing,
        config,
    )
}

/// Powers (W) and surface shares of one operating point.
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    pub p_r: Vec<f64>,
    pub p_d: Vec<f64>,
    pub t: Vec<f64>,
}

impl Allocation {
    pub fn zeros(s: usize, l3: usize) -> Self {
        Self {
            p_r: vec![0.0; s],
            p_d: vec![0.0; l3],
            t: vec![0.0; s],
        }
    }

    pub fn total_power(&self) -> f64 {
        self.p_r.iter().sum::<f64>() + self.p_d.iter().sum::<f64>()
    }

    /// Checks nonnegativity, the power budget and `sum t = 1`.
    pub fn check(&self, problem: &AsymptoticProblem) -> Result<()> {
        if self.p_r.len() != problem.s() || self.t.len() != problem.s() || self.p_d.len() != problem.l3() {
            return Err(Error::Dimension(format!(
                "allocation sizes ({}, {}, {}) do not match S = {}, L3 = {}",
                self.p_r.len(),
                self.p_d.len(),
                self.t.len(),
                problem.s(),
                problem.l3()
            )));
        }
        let p = problem.power();
        if self.p_r.iter().chain(&self.p_d).any(|&x| x < -CONSTRAINT_TOL * p) {
            return Err(Error::Constraint("negative power".into()));
        }
        if self.t.iter().any(|&x| x < -CONSTRAINT_TOL) {
            return Err(Error::Constraint("negative surface share".into()));
        }
        let budget = self.total_power();
        if (budget - p).abs() > CONSTRAINT_TOL * p {
            return Err(Error::Constraint(format!(
                "total power {budget} differs from budget {p}"
            )));
        }
        let t_sum: f64 = self.t.iter().sum();
        if (t_sum - 1.0).abs() > CONSTRAINT_TOL {
            return Err(Error::Constraint(format!("surface shares sum to {t_sum}")));
        }
        Ok(())
    }
}

/// Solved operating point.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub allocation: Allocation,
    /// Dual of the power budget (natural-log units).
    pub v: f64,
    /// Dual of the surface-share constraint (natural-log units).
    pub w: f64,
    /// Activated cascaded paths (sorted indices).
    pub s_active: Vec<usize>,
    /// Activated direct paths (sorted indices).
    pub i_active: Vec<usize>,
    /// Rate in bit/s/Hz.
    pub rate: f64,
}

impl Solution {
    /// Number of activated cascaded paths.
    pub fn s_min_star(&self) -> usize {
        self.s_active.len()
    }

    /// Cascaded power total `P^r`.
    pub fn cascaded_power(&self) -> f64 {
        self.allocation.p_r.iter().sum()
    }
}

/// Rate formula without constraint checks.
pub fn rate_value(problem: &AsymptoticProblem, alloc: &Allocation) -> f64 {
    let cascaded: f64 = problem
        .m_r
        .iter()
        .zip(&alloc.p_r)
        .zip(&alloc.t)
        .map(|((m, p), t)| (m * p.max(0.0) * t * t).ln_1p())
        .sum();
    let direct: f64 = problem
        .m_d
        .iter()
        .zip(&alloc.p_d)
        .map(|(m, p)| (m * p.max(0.0)).ln_1p())
        .sum();
    (cascaded + direct) / std::f64::consts::LN_2
}

/// `sum_s log2(1 + m_s^r p_s^r t_s^2) + sum_i log2(1 + m_i^d p_i^d)`.
pub fn rate(problem: &AsymptoticProblem, alloc: &Allocation) -> Result<f64> {
    alloc.check(problem)?;
    Ok(rate_value(problem, alloc))
}

/// Pairs the k-th strongest Tx-RIS path with the k-th strongest RIS-Rx path.
pub fn optimal_pairing(l1: usize, l2: usize) -> PairingMatrix {
    let pairs: Vec<(usize, usize)> = (0..l1.min(l2)).map(|k| (k, k)).collect();
    PairingMatrix::from_pairs(l1, l2, &pairs).expect("diagonal pairing is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{realization_rng, ChannelRealization};

    fn alloc(p_r: &[f64], p_d: &[f64], t: &[f64]) -> Allocation {
        Allocation {
            p_r: p_r.to_vec(),
            p_d: p_d.to_vec(),
            t: t.to_vec(),
        }
    }

    #[test]
    fn rate_examples() {
        let prob = AsymptoticProblem::new(vec![16.0], vec![], 1.0).unwrap();
        let r = rate(&prob, &alloc(&[1.0], &[], &[1.0])).unwrap();
        assert!((r - 17f64.log2()).abs() < 1e-12);
        assert!((r - 4.0875).abs() < 1e-4);

        let prob = AsymptoticProblem::new(vec![16.0, 16.0], vec![], 2.0).unwrap();
        let even = rate(&prob, &alloc(&[1.0, 1.0], &[], &[0.5, 0.5])).unwrap();
        let single = rate_value(&prob, &alloc(&[1.0, 1.0], &[], &[1.0, 0.0]));
        assert!((even - 2.0 * 5f64.log2()).abs() < 1e-12);
        assert!((even - 4.6439).abs() < 1e-4);
        assert!(even > single);
        assert!((single - 17f64.log2()).abs() < 1e-12);

        let prob = AsymptoticProblem::new(vec![3.0], vec![2.0], 1.0).unwrap();
        assert!(rate(&prob, &alloc(&[0.0], &[0.0], &[1.0])).is_err());
        assert_eq!(rate_value(&prob, &alloc(&[0.0], &[0.0], &[1.0])), 0.0);
    }

    #[test]
    fn rate_rejects_infeasible() {
        let prob = AsymptoticProblem::new(vec![3.0, 1.0], vec![2.0], 1.0).unwrap();
        assert!(rate(&prob, &alloc(&[0.5, 0.2], &[0.3], &[0.5, 0.5])).is_ok());
        assert!(rate(&prob, &alloc(&[0.5, 0.2], &[0.3], &[0.6, 0.5])).is_err());
        assert!(rate(&prob, &alloc(&[0.5, 0.2], &[0.4], &[0.5, 0.5])).is_err());
        assert!(rate(&prob, &alloc(&[1.1, -0.1], &[0.0], &[0.5, 0.5])).is_err());
        assert!(rate(&prob, &alloc(&[1.0], &[0.0], &[1.0])).is_err());
    }

    #[test]
    fn problem_sorts_and_records_order() {
        let prob = AsymptoticProblem::new(vec![1.0, 5.0, 3.0], vec![0.5, 2.0], 1.0).unwrap();
        assert_eq!(prob.m_r(), &[5.0, 3.0, 1.0]);
        assert_eq!(prob.r_order(), &[1, 2, 0]);
        assert_eq!(prob.m_d(), &[2.0, 0.5]);
        assert_eq!(prob.d_order(), &[1, 0]);
        assert!(AsymptoticProblem::new(vec![], vec![1.0], 1.0).is_err());
        assert!(AsymptoticProblem::new(vec![1.0], vec![], 0.0).is_err());
    }

    #[test]
    fn coefficient_examples() {
        let one = Complex64::new(1.0, 0.0);
        let pairing = optimal_pairing(1, 1);
        let scales = CoefficientScales {
            cascaded: 7.5,
            direct: 2.0,
        };
        let prob = coefficients_from_gains(&[one], &[one], &[one], &pairing, scales, 1.0).unwrap();
        assert_eq!(prob.m_r(), &[7.5]);
        assert_eq!(prob.m_d(), &[2.0]);

        // gains chosen so that |alpha_s beta_s|^2 = m_s / c
        let c = 3.0;
        let targets = [93.0, 74.0, 54.0, 15.0];
        let alpha: Vec<Complex64> = targets
            .iter()
            .map(|m: &f64| Complex64::new((m / c).sqrt(), 0.0))
            .collect();
        let prob = coefficients_from_gains(
            &alpha,
            &[one; 4],
            &[],
            &optimal_pairing(4, 4),
            CoefficientScales {
                cascaded: c,
                direct: 0.0,
            },
            1.0,
        )
        .unwrap();
        for (a, b) in prob.m_r().iter().zip(targets) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(prob.l3(), 0);
    }

    #[test]
    fn doubling_n_quadruples_cascaded_coefficients() {
        let cfg = SimulationConfig {
            nx: 10,
            ny: 20,
            ..SimulationConfig::default()
        };
        let real = ChannelRealization::sample(&cfg, &mut realization_rng(4, 0)).unwrap();
        let pairing = optimal_pairing(cfg.l1, cfg.l2);
        let a = coefficients(&real, &pairing, &cfg).unwrap();
        let cfg2 = SimulationConfig { ny: 40, ..cfg.clone() };
        let b = coefficients_from_paths(&real.tx_ris, &real.ris_rx, real.tx_rx.as_ref(), &pairing, &cfg2).unwrap();
        for (x, y) in a.m_r().iter().zip(b.m_r()) {
            assert!((y / x - 4.0).abs() < 1e-12);
        }
        assert_eq!(a.m_d(), b.m_d());
        assert_eq!(a.s_max(), 5);
    }

    #[test]
    fn table_scale_coefficients() {
        let cfg = SimulationConfig::default();
        let s = CoefficientScales::from_config(&cfg);
        // about 1.06e4 per unit |alpha beta|^2 and 1.1e3 per unit |gamma|^2 at 1 W
        assert!(s.cascaded > 1.0e4 && s.cascaded < 1.1e4, "{}", s.cascaded);
        assert!(s.direct > 1.0e3 && s.direct < 1.2e3, "{}", s.direct);
    }

    #[test]
    fn optimal_pairing_examples() {
        let b = optimal_pairing(2, 3);
        assert_eq!(b, PairingMatrix::new(2, 3, &[1, 0, 0, 0, 1, 0]).unwrap());
        let b = optimal_pairing(1, 4);
        assert_eq!(b.pairs(), vec![(0, 0)]);
        let b = optimal_pairing(3, 2);
        assert_eq!(b.pairs(), vec![(0, 0), (1, 1)]);
    }

    #[test]
    fn pairing_shape_is_checked() {
        let one = Complex64::new(1.0, 0.0);
        let scales = CoefficientScales {
            cascaded: 1.0,
            direct: 1.0,
        };
        assert!(coefficients_from_gains(&[one; 2], &[one; 3], &[], &optimal_pairing(3, 2), scales, 1.0).is_err());
    }
}
