//! Finite-size realization of an asymptotic solution and its exact rate.

use std::f64::consts::{LN_2, PI};

use nalgebra::{Cholesky, DMatrix};
use num_complex::Complex64;
use rand::Rng;

use crate::asymptotic::{AsymptoticProblem, Solution};
use crate::channel::{ula_response, CMatrix, ChannelRealization, Direction};
use crate::error::{Error, Result};
use crate::partition::{build_theta, feasible_gradients, PartitionPlan, RoundedPartition};
use crate::solver::water_filling;

/// `A diag(p) A^H` for steering columns `A` (`M_t x K`).
pub fn eigenmode_covariance(basis: &CMatrix, powers: &[f64]) -> Result<CMatrix> {
    if basis.ncols() != powers.len() {
        return Err(Error::Dimension(format!(
            "{} steering columns, {} powers",
            basis.ncols(),
            powers.len()
        )));
    }
    if powers.iter().any(|&p| p < 0.0 || !p.is_finite()) {
        return Err(Error::InvalidInput("powers must be finite and nonnegative".into()));
    }
    let mut scaled = basis.clone();
    for (k, mut col) in scaled.column_iter_mut().enumerate() {
        col *= Complex64::from(powers[k]);
    }
    Ok(scaled * basis.adjoint())
}

fn hermitian_logdet(m: CMatrix) -> Result<f64> {
    match Cholesky::new(m.clone()) {
        Some(ch) => Ok(2.0 * ch.l().diagonal().iter().map(|d| d.re.ln()).sum::<f64>()),
        None => {
            let eig = m.symmetric_eigen();
            if eig.eigenvalues.iter().any(|&e| e <= 0.0) {
                return Err(Error::InvalidInput("log-determinant of a singular matrix".into()));
            }
            Ok(eig.eigenvalues.iter().map(|e| e.ln()).sum())
        }
    }
}

/// Rejects `Q` whose smallest eigenvalue is below `-1e-9 * trace(Q)`.
pub fn check_psd(q: &CMatrix) -> Result<()> {
    if q.nrows() != q.ncols() {
        return Err(Error::Dimension("covariance must be square".into()));
    }
    let trace = q.trace().re;
    let min = q
        .clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    if min < -1e-9 * trace.abs().max(f64::MIN_POSITIVE) {
        return Err(Error::NotPsd { min_eigenvalue: min });
    }
    Ok(())
}

/// `log2 det(I + H Q H^H / sigma2)` via a Cholesky factorization.
pub fn logdet_rate(h_eff: &CMatrix, q: &CMatrix, noise_power: f64) -> Result<f64> {
    if h_eff.ncols() != q.nrows() {
        return Err(Error::Dimension(format!(
            "channel has {} columns, covariance is {}x{}",
            h_eff.ncols(),
            q.nrows(),
            q.ncols()
        )));
    }
    check_psd(q)?;
    let n = h_eff.nrows();
    let mut m = h_eff * q * h_eff.adjoint() / Complex64::from(noise_power);
    for i in 0..n {
        m[(i, i)] += 1.0;
    }
    let m = (&m + m.adjoint()) * Complex64::from(0.5);
    Ok(hermitian_logdet(m)? / LN_2)
}

/// Rate of `H Q H^H` with `Q = A diag(p) A^H`, evaluated through the
/// `K x K` form `I + diag(sqrt p) (HA)^H (HA) diag(sqrt p) / sigma2`.
pub fn factored_rate(h_times_basis: &CMatrix, powers: &[f64], noise_power: f64) -> f64 {
    let k = powers.len();
    let gram = h_times_basis.adjoint() * h_times_basis;
    let mut m = DMatrix::<Complex64>::identity(k, k);
    for i in 0..k {
        for j in 0..k {
            m[(i, j)] += gram[(i, j)] * (powers[i] * powers[j]).sqrt() / noise_power;
        }
    }
    let m = (&m + m.adjoint()) * Complex64::from(0.5);
    hermitian_logdet(m).map(|x| x / LN_2).unwrap_or(0.0)
}

/// Which transmit stream a steering column serves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    /// Sorted cascaded index.
    Cascaded(usize),
    /// Sorted direct index.
    Direct(usize),
}

/// Effective channel times the steering basis, split by sub-surface so the
/// common phases can be changed without touching the full channel.
#[derive(Debug, Clone)]
pub struct PhaseModel {
    /// `sqrt(PL_r) H2 diag(theta_s^0) H1 A` for each sub-surface (phase 0).
    per_subsurface: Vec<CMatrix>,
    /// `sqrt(PL_d) H3 A`.
    direct: CMatrix,
    powers: Vec<f64>,
    noise_power: f64,
}

impl PhaseModel {
    pub fn rate(&self, psi: &[f64]) -> f64 {
        let mut b = self.direct.clone();
        for (term, &phase) in self.per_subsurface.iter().zip(psi) {
            b += term * Complex64::from_polar(1.0, phase);
        }
        factored_rate(&b, &self.powers, self.noise_power)
    }
}

/// Finite-size evaluation of an asymptotic solution.
#[derive(Debug, Clone)]
pub struct FiniteEvaluation {
    /// Realized plan (only non-empty sub-surfaces).
    pub plan: PartitionPlan,
    pub rounding: RoundedPartition,
    /// Transmit covariance `A diag(p) A^H`.
    pub covariance: CMatrix,
    pub streams: Vec<Stream>,
    pub powers: Vec<f64>,
    /// Exact log-det rate (bit/s/Hz).
    pub rate: f64,
    pub asymptotic_rate: f64,
    /// `|rate - asymptotic_rate| / asymptotic_rate`.
    pub gap: f64,
    /// Powers were re-water-filled because a sub-surface was dropped.
    pub reallocated: bool,
    model: PhaseModel,
}

impl FiniteEvaluation {
    pub fn common_phases(&self) -> &[f64] {
        self.plan.common_phases()
    }

    /// Rate with the given common phases (plan unchanged).
    pub fn rate_at(&self, psi: &[f64]) -> f64 {
        self.model.rate(psi)
    }

    /// Installs new common phases and recomputes the rate.
    pub fn with_phases(&self, psi: &[f64]) -> Result<FiniteEvaluation> {
        let mut next = self.clone();
        next.plan.set_common_phases(psi)?;
        next.rate = next.model.rate(next.plan.common_phases());
        next.gap = relative_gap(next.rate, next.asymptotic_rate);
        Ok(next)
    }
}

fn relative_gap(rate: f64, reference: f64) -> f64 {
    if reference > 0.0 {
        (rate - reference).abs() / reference
    } else {
        rate.abs()
    }
}

fn tx_departure(direction: &Direction) -> f64 {
    match *direction {
        Direction::Ula(theta) => theta,
        Direction::Planar { .. } => unreachable!("Tx departures are ULA angles"),
    }
}

/// How the common phases of the realized plan are chosen.
pub enum PhaseInit<'a, R: Rng + ?Sized> {
    Random(&'a mut R),
    Fixed(&'a [f64]),
}

/// Realizes `solution` on the sampled channel with uniformly random common phases.
pub fn adapt_solution<R: Rng + ?Sized>(
    problem: &AsymptoticProblem,
    solution: &Solution,
    realization: &ChannelRealization,
    rng: &mut R,
) -> Result<FiniteEvaluation> {
    adapt_solution_with(problem, solution, realization, PhaseInit::Random(rng))
}

/// Realizes `solution` on the sampled channel.
///
/// Shares are rounded onto the RIS columns; when a sub-surface is dropped the
/// power is re-water-filled over the surviving streams with the realized
/// shares. Each served stream uses the Tx steering vector of its path.
pub fn adapt_solution_with<R: Rng + ?Sized>(
    problem: &AsymptoticProblem,
    solution: &Solution,
    realization: &ChannelRealization,
    phases: PhaseInit<'_, R>,
) -> Result<FiniteEvaluation> {
    let ris = realization.ris;
    let feasible = feasible_gradients(&realization.tx_ris, &realization.ris_rx)?;
    let alloc = &solution.allocation;

    // sub-surfaces: activated cascaded paths, or the strongest pair if none
    let served: Vec<usize> = if solution.s_active.is_empty() {
        vec![0]
    } else {
        solution.s_active.clone()
    };
    let t_sum: f64 = served.iter().map(|&s| alloc.t[s]).sum();
    let t: Vec<f64> = served.iter().map(|&s| alloc.t[s] / t_sum).collect();
    let rounding = crate::partition::round_partition(&t, ris.ny())?;
    let kept: Vec<usize> = (0..served.len()).filter(|&k| rounding.counts[k] > 0).collect();
    let psi: Vec<f64> = match phases {
        PhaseInit::Random(rng) => kept.iter().map(|_| rng.random::<f64>() * 2.0 * PI).collect(),
        PhaseInit::Fixed(psi) => {
            if psi.len() != kept.len() {
                return Err(Error::Dimension(format!(
                    "{} phases for {} realized sub-surfaces",
                    psi.len(),
                    kept.len()
                )));
            }
            psi.to_vec()
        }
    };
    let pairs: Vec<(usize, usize)> = kept.iter().map(|&k| problem.pairs()[served[k]]).collect();
    let plan = PartitionPlan::with_columns(
        kept.iter().map(|&k| rounding.counts[k]).collect(),
        pairs.iter().map(|&(u, v)| feasible.get(u, v)).collect(),
        pairs.clone(),
        psi,
        feasible.l1(),
        feasible.l2(),
    )?;

    // stream powers
    let mut streams = Vec::new();
    let mut powers = Vec::new();
    let reallocated = rounding.was_reapportioned();
    if reallocated {
        let mut gains = Vec::new();
        let mut ids = Vec::new();
        for &k in &kept {
            let s = served[k];
            let ts = rounding.t[k];
            gains.push(problem.m_r()[s] * ts * ts);
            ids.push(Stream::Cascaded(s));
        }
        for i in 0..problem.l3() {
            gains.push(problem.m_d()[i]);
            ids.push(Stream::Direct(i));
        }
        let (p, _) = water_filling(&gains, problem.power())?;
        for (id, p) in ids.into_iter().zip(p) {
            if p > 0.0 {
                streams.push(id);
                powers.push(p);
            }
        }
    } else {
        for &k in &kept {
            let s = served[k];
            if alloc.p_r[s] > 0.0 {
                streams.push(Stream::Cascaded(s));
                powers.push(alloc.p_r[s]);
            }
        }
        for i in 0..problem.l3() {
            if alloc.p_d[i] > 0.0 {
                streams.push(Stream::Direct(i));
                powers.push(alloc.p_d[i]);
            }
        }
    }

    let tx = realization.tx;
    let mut basis = CMatrix::zeros(tx.element_count(), streams.len());
    for (col, stream) in streams.iter().enumerate() {
        let theta = match *stream {
            Stream::Cascaded(s) => tx_departure(&realization.tx_ris.departures()[problem.pairs()[s].0]),
            Stream::Direct(i) => {
                let paths = realization
                    .tx_rx
                    .as_ref()
                    .ok_or_else(|| Error::InvalidInput("direct stream without a direct link".into()))?;
                tx_departure(&paths.departures()[problem.d_order()[i]])
            }
        };
        basis.set_column(col, &ula_response(theta, &tx));
    }
    let covariance = eigenmode_covariance(&basis, &powers)?;

    // per-sub-surface factors at zero common phase
    let mut zero_plan = plan.clone();
    zero_plan.set_common_phases(&vec![0.0; plan.len()])?;
    let theta0 = build_theta(&zero_plan, &ris)?;
    let g = &realization.h1 * &basis;
    let sqrt_plr = Complex64::from(realization.path_loss.cascaded.sqrt());
    let offsets = plan.column_offsets().expect("realized plan");
    let mut per_subsurface = Vec::with_capacity(plan.len());
    for s in 0..plan.len() {
        let mut term = CMatrix::zeros(realization.h2.nrows(), streams.len());
        for ix in 0..ris.nx() {
            for iy in offsets[s]..offsets[s + 1] {
                let n = ris.flat_index(ix, iy);
                let row = g.row(n) * theta0[n];
                term += realization.h2.column(n) * row;
            }
        }
        per_subsurface.push(term * sqrt_plr);
    }
    let direct = &realization.h3 * &basis * Complex64::from(realization.path_loss.direct.sqrt());
    let model = PhaseModel {
        per_subsurface,
        direct,
        powers: powers.clone(),
        noise_power: realization.noise_power,
    };
    let rate = model.rate(plan.common_phases());
    Ok(FiniteEvaluation {
        plan,
        rounding,
        covariance,
        streams,
        powers,
        rate,
        asymptotic_rate: solution.rate,
        gap: relative_gap(rate, solution.rate),
        reallocated,
        model,
    })
}

/// Cyclic coordinate ascent over the common phases. Each coordinate tries
/// `grid_points` equally spaced phases starting at its current value, so the
/// rate never decreases.
pub fn refine_common_phases(evaluation: &FiniteEvaluation, sweeps: usize, grid_points: usize) -> FiniteEvaluation {
    let mut psi = evaluation.common_phases().to_vec();
    let mut best = evaluation.rate_at(&psi);
    let grid = grid_points.max(1);
    for _ in 0..sweeps {
        for s in 0..psi.len() {
            let start = psi[s];
            let mut best_phase = start;
            for k in 1..grid {
                psi[s] = start + 2.0 * PI * k as f64 / grid as f64;
                let r = evaluation.rate_at(&psi);
                if r > best {
                    best = r;
                    best_phase = psi[s];
                }
            }
            psi[s] = best_phase;
        }
    }
    evaluation.with_phases(&psi).expect("phase count matches the plan")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asymptotic::{coefficients, optimal_pairing, Allocation};
    use crate::channel::{realization_rng, ArrayGeometry, PathLoss, SimulationConfig};
    use crate::solver::{solve, SolveOptions};

    #[test]
    fn covariance_examples() {
        let basis = CMatrix::identity(4, 2);
        let q = eigenmode_covariance(&basis, &[0.0, 0.0]).unwrap();
        assert!(q.norm() == 0.0);
        let q = eigenmode_covariance(&basis, &[1.0, 2.0]).unwrap();
        let mut eig: Vec<f64> = q.symmetric_eigen().eigenvalues.iter().cloned().collect();
        eig.sort_by(f64::total_cmp);
        assert!((eig[3] - 2.0).abs() < 1e-12 && (eig[2] - 1.0).abs() < 1e-12 && eig[1].abs() < 1e-12);
        assert!(eigenmode_covariance(&basis, &[1.0]).is_err());
    }

    #[test]
    fn covariance_trace_matches_power() {
        let g = ArrayGeometry::half_wavelength(32).unwrap();
        let mut rng = realization_rng(8, 0);
        let mut basis = CMatrix::zeros(32, 4);
        for k in 0..4 {
            basis.set_column(k, &ula_response(rng.random::<f64>() * 2.0 * PI, &g));
        }
        let p = [0.4, 0.3, 0.2, 0.1];
        let q = eigenmode_covariance(&basis, &p).unwrap();
        assert!((q.trace().re - 1.0).abs() < 0.02);
        check_psd(&q).unwrap();
    }

    #[test]
    fn logdet_examples() {
        let h = CMatrix::zeros(3, 2);
        let q = CMatrix::identity(2, 2);
        assert_eq!(logdet_rate(&h, &q, 1.0).unwrap(), 0.0);

        let hv = nalgebra::DVector::from_vec(vec![Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8)]);
        let gv = nalgebra::DVector::from_vec(vec![Complex64::new(0.0, 1.0), Complex64::new(0.0, 0.0)]);
        let h = &hv * gv.adjoint();
        let q = &gv * gv.adjoint() * Complex64::from(3.0);
        let r = logdet_rate(&h, &q, 0.5).unwrap();
        assert!((r - (1.0 + 3.0 / 0.5f64).log2()).abs() < 1e-12);

        let bad = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(-0.5, 0.0),
        ]));
        assert!(matches!(logdet_rate(&h, &bad, 1.0), Err(Error::NotPsd { .. })));
    }

    #[test]
    fn factored_rate_matches_full_logdet() {
        let mut rng = realization_rng(12, 0);
        let h = CMatrix::from_fn(5, 6, |_, _| crate::channel::sample_cscg(&mut rng));
        let basis = CMatrix::from_fn(6, 3, |_, _| crate::channel::sample_cscg(&mut rng));
        let p = [0.5, 1.5, 0.2];
        let q = eigenmode_covariance(&basis, &p).unwrap();
        let full = logdet_rate(&h, &q, 0.3).unwrap();
        let fact = factored_rate(&(&h * &basis), &p, 0.3);
        assert!((full - fact).abs() < 1e-10);
    }

    fn small_setup(seed: u64) -> (SimulationConfig, ChannelRealization, AsymptoticProblem, Solution) {
        let cfg = SimulationConfig {
            m_t: 8,
            m_r: 8,
            nx: 8,
            ny: 8,
            l1: 2,
            l2: 2,
            l3: 1,
            ..SimulationConfig::default()
        };
        let real = ChannelRealization::sample(&cfg, &mut realization_rng(seed, 0)).unwrap();
        let prob = coefficients(&real, &optimal_pairing(2, 2), &cfg).unwrap();
        let sol = solve(&prob, &SolveOptions::default()).unwrap();
        (cfg, real, prob, sol)
    }

    #[test]
    fn phase_model_matches_dense_evaluation() {
        let (_, real, prob, sol) = small_setup(1);
        let eval = adapt_solution(&prob, &sol, &real, &mut realization_rng(2, 0)).unwrap();
        let theta = build_theta(&eval.plan, &real.ris).unwrap();
        let h = crate::channel::effective_channel(&real, &theta).unwrap();
        let dense = logdet_rate(&h, &eval.covariance, real.noise_power).unwrap();
        assert!((dense - eval.rate).abs() < 1e-9 * dense.max(1.0));
        assert!(eval.rate >= 0.0);
    }

    #[test]
    fn direct_only_matches_waterfilling_rate() {
        let (_, mut real, prob, _) = small_setup(3);
        real.path_loss = PathLoss {
            cascaded: 0.0,
            direct: real.path_loss.direct,
        };
        let mut alloc = Allocation::zeros(prob.s(), prob.l3());
        alloc.p_d[0] = prob.power();
        alloc.t[0] = 1.0;
        let rate = crate::asymptotic::rate_value(&prob, &alloc);
        let sol = Solution {
            allocation: alloc,
            v: 0.0,
            w: 0.0,
            s_active: vec![],
            i_active: vec![0],
            rate,
        };
        let eval = adapt_solution(&prob, &sol, &real, &mut realization_rng(4, 0)).unwrap();
        assert!((eval.rate - rate).abs() < 1e-9);
    }

    #[test]
    fn refinement_is_monotone() {
        let (_, real, prob, sol) = small_setup(5);
        let eval = adapt_solution(&prob, &sol, &real, &mut realization_rng(6, 0)).unwrap();
        let one = refine_common_phases(&eval, 1, 16);
        let two = refine_common_phases(&one, 1, 16);
        assert!(one.rate >= eval.rate);
        assert!(two.rate >= one.rate);
        let same = refine_common_phases(&eval, 2, 1);
        assert_eq!(same.rate, eval.rate);
    }

    #[test]
    fn fixed_phases_are_used() {
        let (_, real, prob, sol) = small_setup(7);
        let eval = adapt_solution(&prob, &sol, &real, &mut realization_rng(1, 0)).unwrap();
        let psi = vec![0.25; eval.plan.len()];
        let fixed = adapt_solution_with::<rand_chacha::ChaCha8Rng>(&prob, &sol, &real, PhaseInit::Fixed(&psi)).unwrap();
        assert_eq!(fixed.common_phases(), &psi[..]);
        assert!((fixed.rate - eval.rate_at(&psi)).abs() < 1e-12);
    }
}
