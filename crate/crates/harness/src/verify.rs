//! Seeded property suites behind `rispart verify`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rispart::asymptotic::{optimal_pairing, rate_value, Allocation, AsymptoticProblem, CoefficientScales};
use rispart::channel::{
    realization_rng, sample_cscg, steering_vector, CMatrix, ChannelRealization, RisGeometry, SimulationConfig,
};
use rispart::finite::{adapt_solution, eigenmode_covariance, logdet_rate, refine_common_phases};
use rispart::oracle::{brute_force_p3, compositions, enumerate_pairings, resolution_bound, GridSpec};
use rispart::partition::{
    build_theta, gain_asymptotic, gain_closed_form, gain_direct_sum, round_partition, tile_plan_gain, PartitionPlan,
    PhaseGradient, TilePlan,
};
use rispart::solver::{
    grid_search, linear_relation_error, lm_search, lm_solve_from, ordering_violation, pattern_form_error, solve,
    solve_p32, water_filling, GridSearchConfig, LmConfig, SolveOptions,
};

use crate::error::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Lemmas,
    Propositions,
    Gains,
    Solvers,
    Finite,
    All,
}

impl FromStr for Suite {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, HarnessError> {
        Ok(match s {
            "lemmas" => Suite::Lemmas,
            "propositions" => Suite::Propositions,
            "gains" => Suite::Gains,
            "solvers" => Suite::Solvers,
            "finite" => Suite::Finite,
            "all" => Suite::All,
            _ => {
                return Err(HarnessError::Config(format!(
                    "unknown suite {s:?} (lemmas | propositions | gains | solvers | finite | all)"
                )))
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub suite: &'static str,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{status} {}/{}: {}", self.suite, self.name, self.detail)
    }
}

fn check(suite: &'static str, name: &'static str, passed: bool, detail: String) -> Check {
    Check {
        suite,
        name,
        passed,
        detail,
    }
}

pub fn run_suite(suite: Suite, seed: u64) -> Vec<Check> {
    match suite {
        Suite::Lemmas => lemmas(seed),
        Suite::Propositions => propositions(seed),
        Suite::Gains => gains(seed),
        Suite::Solvers => solvers(seed),
        Suite::Finite => finite(seed),
        Suite::All => [lemmas, propositions, gains, solvers, finite]
            .iter()
            .flat_map(|f| f(seed))
            .collect(),
    }
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    10f64.powf(rng.random_range(lo.log10()..hi.log10()))
}

/// Random problem with `S <= max_s`, `L3 <= max_l3`.
pub fn random_problem(rng: &mut ChaCha8Rng, max_s: usize, max_l3: usize) -> AsymptoticProblem {
    let s = rng.random_range(1..=max_s);
    let l3 = rng.random_range(0..=max_l3);
    let m_r = (0..s).map(|_| log_uniform(rng, 0.5, 500.0)).collect();
    let m_d = (0..l3).map(|_| log_uniform(rng, 0.5, 500.0)).collect();
    let power = log_uniform(rng, 0.1, 10.0);
    AsymptoticProblem::new(m_r, m_d, power).expect("positive coefficients")
}

fn random_plan(rng: &mut ChaCha8Rng) -> (RisGeometry, PartitionPlan) {
    let nx = rng.random_range(1..=16);
    let ny = rng.random_range(1..=16);
    let s = rng.random_range(1..=ny.min(4));
    let mut counts = vec![1usize; s];
    for _ in 0..ny - s {
        counts[rng.random_range(0..s)] += 1;
    }
    let gradients = (0..s)
        .map(|_| PhaseGradient::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)))
        .collect();
    let psi = (0..s).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
    let plan = PartitionPlan::with_columns(counts, gradients, (0..s).map(|i| (i, i)).collect(), psi, s, s)
        .expect("valid plan");
    (RisGeometry::half_wavelength(nx, ny).expect("nonempty surface"), plan)
}

fn gains(seed: u64) -> Vec<Check> {
    let mut rng = realization_rng(seed, 1);
    let mut identity = 0.0f64;
    let mut magnitude = 0.0f64;
    let mut position = 0.0f64;
    for _ in 0..50 {
        let (ris, plan) = random_plan(&mut rng);
        let theta = build_theta(&plan, &ris).expect("plan fits surface");
        let mut probes = plan.gradients().to_vec();
        probes.push(PhaseGradient::new(
            rng.random_range(-2.0..2.0),
            rng.random_range(-2.0..2.0),
        ));
        for z in &probes {
            let closed = gain_closed_form(&plan, &ris, *z).expect("realized plan");
            identity = identity.max((gain_direct_sum(&theta, &ris, *z) - closed).norm());
            magnitude = magnitude.max(closed.norm());
        }
        let s = plan.len();
        let rot: Vec<usize> = (0..s).map(|i| (i + 1) % s).collect();
        let rotated = PartitionPlan::new(
            rot.iter().map(|&i| plan.t()[i]).collect(),
            rot.iter().map(|&i| plan.gradients()[i]).collect(),
            rot.iter().map(|&i| plan.pairs()[i]).collect(),
            rot.iter().map(|&i| plan.common_phases()[i]).collect(),
            s,
            s,
        )
        .expect("permuted plan");
        for z in &probes {
            position = position.max((gain_asymptotic(&plan, *z) - gain_asymptotic(&rotated, *z)).norm());
        }
    }

    let ris = RisGeometry::half_wavelength(16, 16).expect("nonempty surface");
    let mut tiles = 0.0f64;
    for _ in 0..20 {
        let s = rng.random_range(1..=3);
        let mut cols = vec![1usize; s];
        for _ in 0..4 - s {
            cols[rng.random_range(0..s)] += 1;
        }
        let gradients: Vec<PhaseGradient> = (0..s)
            .map(|_| PhaseGradient::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)))
            .collect();
        let psi: Vec<f64> = (0..s).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
        let mu: Vec<f64> = cols.iter().map(|&c| c as f64 / 4.0).collect();
        let tile_plan = TilePlan::from_fractions(&ris, 0.5, &mu, gradients.clone(), psi.clone()).expect("whole tiles");
        let plan = PartitionPlan::with_columns(
            cols.iter().map(|c| c * 4).collect(),
            gradients,
            (0..s).map(|i| (i, i)).collect(),
            psi,
            s,
            s,
        )
        .expect("valid plan");
        let z = PhaseGradient::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        for probe in plan.gradients().iter().chain(std::iter::once(&z)) {
            let a = tile_plan_gain(&tile_plan, &ris, *probe);
            let b = gain_closed_form(&plan, &ris, *probe).expect("realized plan");
            tiles = tiles.max((a - b).norm());
        }
    }

    vec![
        check(
            "gains",
            "closed_form_identity",
            identity < 1e-10,
            format!("50 plans, max |error| {identity:.2e}"),
        ),
        check(
            "gains",
            "magnitude_bound",
            magnitude <= 1.0 + 1e-12,
            format!("max |d| {magnitude:.12}"),
        ),
        check(
            "gains",
            "asymptotic_position_invariance",
            position < 1e-14,
            format!("max change {position:.2e}"),
        ),
        check(
            "gains",
            "tile_equivalence",
            tiles < 1e-10,
            format!("20 tilings, max |error| {tiles:.2e}"),
        ),
    ]
}

fn lemmas(seed: u64) -> Vec<Check> {
    let mut rng = realization_rng(seed, 2);
    let opts = SolveOptions::default();
    let (mut linear, mut order, mut form) = (0.0f64, 0.0f64, 0.0f64);
    let mut failures = 0;
    for _ in 0..200 {
        let prob = random_problem(&mut rng, 4, 2);
        match solve(&prob, &opts) {
            Ok(sol) => {
                linear = linear.max(linear_relation_error(&sol));
                order = order.max(ordering_violation(&sol));
                form = form.max(pattern_form_error(&prob, &sol));
            }
            Err(_) => failures += 1,
        }
    }
    vec![
        check(
            "lemmas",
            "solves",
            failures == 0,
            format!("{failures} of 200 instances failed"),
        ),
        check(
            "lemmas",
            "linear_relation",
            linear < 1e-6,
            format!("max |t - p/P^r| {linear:.2e}"),
        ),
        check("lemmas", "ordering", order < 1e-9, format!("max violation {order:.2e}")),
        check(
            "lemmas",
            "pattern_form",
            form < 1e-6,
            format!("max distance {form:.2e}"),
        ),
    ]
}

/// Two-share stationary points `1/w + sigma_s sqrt(1/w^2 - 1/m_s)` summing to one.
fn two_share_roots(m: [f64; 2], signs: [f64; 2]) -> Vec<[f64; 2]> {
    let shares = |w: f64| {
        let f = |mi: f64, sg: f64| 1.0 / w + sg * (1.0 / (w * w) - 1.0 / mi).max(0.0).sqrt();
        [f(m[0], signs[0]), f(m[1], signs[1])]
    };
    let g = |w: f64| {
        let t = shares(w);
        t[0] + t[1] - 1.0
    };
    let w_max = m[0].min(m[1]).sqrt();
    let n = 4000;
    let mut roots = Vec::new();
    let mut prev = (w_max * 1e-6, g(w_max * 1e-6));
    for i in 1..=n {
        let w = w_max * (1e-6 + (1.0 - 1e-6) * i as f64 / n as f64);
        let gw = g(w);
        if prev.1.signum() != gw.signum() || gw == 0.0 {
            let (mut lo, mut hi) = (prev.0, w);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if g(mid).signum() == prev.1.signum() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let t = shares(0.5 * (lo + hi));
            if t.iter().all(|&x| x >= 0.0) {
                roots.push(t);
            }
        }
        prev = (w, gw);
    }
    roots
}

fn propositions(seed: u64) -> Vec<Check> {
    let mut rng = realization_rng(seed, 3);
    let opts = SolveOptions::default();

    let grid = GridSpec::new(40, 200).expect("resolution");
    let (mut below, mut above) = (0usize, 0usize);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let prob = random_problem(&mut rng, 3, 2);
        let oracle = brute_force_p3(&prob, grid).expect("small instance");
        let sol = grid_search(&prob, &GridSearchConfig::default()).expect("grid search");
        let rel = (oracle.rate - sol.rate) / oracle.rate;
        worst = worst.max(rel);
        if rel > 1e-3 {
            below += 1;
        }
        if sol.rate > oracle.rate + resolution_bound(&prob, grid) {
            above += 1;
        }
    }

    let mut pruning = 0usize;
    for _ in 0..100 {
        let s = rng.random_range(1..=3);
        let mut m: Vec<f64> = (0..s).map(|_| log_uniform(&mut rng, 0.1, 1000.0)).collect();
        m.sort_by(|a, b| b.total_cmp(a));
        let best = solve_p32(&m)
            .candidates
            .iter()
            .map(|c| c.objective)
            .fold(f64::NEG_INFINITY, f64::max);
        let res = 100;
        let lattice = compositions(res, s)
            .iter()
            .map(|c| {
                m.iter()
                    .zip(c)
                    .map(|(mi, &ci)| {
                        let t = ci as f64 / res as f64;
                        (mi * t * t).ln_1p()
                    })
                    .sum::<f64>()
            })
            .fold(f64::NEG_INFINITY, f64::max);
        let bound: f64 = m.iter().map(|x| x.sqrt()).sum::<f64>() / res as f64;
        if lattice > best + 1e-12 || best > lattice + bound {
            pruning += 1;
        }
    }

    let (mut mixed, mut maxima, mut minima) = (0usize, 0usize, 0usize);
    let mut seen = [0usize; 3];
    let objective = |m: [f64; 2], t: [f64; 2]| (m[0] * t[0] * t[0]).ln_1p() + (m[1] * t[1] * t[1]).ln_1p();
    let curvature = |m: [f64; 2], t: [f64; 2]| {
        let f = |m: f64, t: f64| 2.0 * m * (1.0 - m * t * t) / (1.0 + m * t * t).powi(2);
        f(m[0], t[0]) + f(m[1], t[1])
    };
    for _ in 0..200 {
        let a = log_uniform(&mut rng, 0.1, 1000.0);
        let b = log_uniform(&mut rng, 0.1, 1000.0);
        let m = [a.max(b), a.min(b)];
        for t in two_share_roots(m, [-1.0, 1.0]) {
            seen[0] += 1;
            if objective(m, t) > objective(m, [1.0, 0.0]) + 1e-9 {
                mixed += 1;
            }
        }
        for t in two_share_roots(m, [1.0, 1.0]) {
            seen[1] += 1;
            if curvature(m, t) >= 1e-9 {
                maxima += 1;
            }
        }
        for t in two_share_roots(m, [-1.0, -1.0]) {
            seen[2] += 1;
            if curvature(m, t) <= -1e-9 {
                minima += 1;
            }
        }
    }

    let scales = CoefficientScales {
        cascaded: 1.0,
        direct: 1.0,
    };
    let mut beaten = 0usize;
    let mut pairing_errors = 0usize;
    for _ in 0..200 {
        let draw = |rng: &mut ChaCha8Rng, n: usize| {
            let mut g: Vec<_> = (0..n).map(|_| sample_cscg(rng)).collect();
            g.sort_by(|a, b| b.norm().total_cmp(&a.norm()));
            g
        };
        let (alpha, beta) = (draw(&mut rng, 3), draw(&mut rng, 3));
        let l3 = rng.random_range(0..=2);
        let gamma = draw(&mut rng, l3);
        let power = log_uniform(&mut rng, 0.1, 1000.0);
        match enumerate_pairings(&alpha, &beta, &gamma, scales, power, &|p| solve(p, &opts)) {
            Ok(table) => {
                let sorted = optimal_pairing(3, 3);
                let own = table
                    .iter()
                    .find(|(b, _)| *b == sorted)
                    .map(|e| e.1)
                    .unwrap_or(f64::NEG_INFINITY);
                if own < table[0].1 - 1e-9 * table[0].1.abs().max(1.0) {
                    beaten += 1;
                }
            }
            Err(_) => pairing_errors += 1,
        }
    }

    vec![
        check(
            "propositions",
            "oracle_equivalence",
            below == 0 && above == 0,
            format!("100 instances: {below} below oracle by > 1e-3, {above} above bound; worst shortfall {worst:.2e}"),
        ),
        check(
            "propositions",
            "prefix_pruning",
            pruning == 0,
            format!("{pruning} of 100 simplex scans disagree"),
        ),
        check(
            "propositions",
            "mixed_pattern_exclusion",
            mixed == 0,
            format!("{mixed} of {} (-,+) points beat [1,0]", seen[0]),
        ),
        check(
            "propositions",
            "plus_plus_maximum",
            maxima == 0,
            format!("{maxima} of {} (+,+) points not maxima", seen[1]),
        ),
        check(
            "propositions",
            "minus_minus_minimum",
            minima == 0,
            format!("{minima} of {} (-,-) points not minima", seen[2]),
        ),
        check(
            "propositions",
            "sorted_pairing",
            beaten == 0 && pairing_errors == 0,
            format!("200 instances: sorted pairing beaten {beaten} times, {pairing_errors} errors"),
        ),
    ]
}

fn solvers(seed: u64) -> Vec<Check> {
    let mut rng = realization_rng(seed, 4);

    let (p, _) = water_filling(&[4.0, 1.0], 1.0).expect("valid input");
    let example = (p[0] - 0.875).abs() < 1e-12 && (p[1] - 0.125).abs() < 1e-12;
    let (mut budget, mut slack) = (0.0f64, 0.0f64);
    for _ in 0..500 {
        let n = rng.random_range(1..=8);
        let m: Vec<f64> = (0..n).map(|_| log_uniform(&mut rng, 1e-2, 1e3)).collect();
        let total = log_uniform(&mut rng, 1e-3, 1e2);
        let (p, v) = water_filling(&m, total).expect("valid input");
        budget = budget.max((p.iter().sum::<f64>() - total).abs() / total);
        for (pi, mi) in p.iter().zip(&m) {
            // marginal gain m/(1 + m p) equals v on active channels and is at most v elsewhere
            let marginal = mi / (1.0 + mi * pi);
            slack = slack.max(if *pi > 0.0 {
                (marginal - v).abs() / v
            } else {
                ((marginal - v) / v).max(0.0)
            });
        }
    }

    let lm = LmConfig::default();
    let grid_cfg = GridSearchConfig::default();
    let (mut agree_warm, mut agree_cold, mut residual_bad, mut budget_bad, mut nondeterministic) = (0, 0, 0, 0, 0);
    let n = 200;
    for _ in 0..n {
        let prob = random_problem(&mut rng, 3, 2);
        let grid = grid_search(&prob, &grid_cfg).expect("grid search");
        if (grid.allocation.total_power() - prob.power()).abs() > grid_cfg.eps_acc * prob.power() {
            budget_bad += 1;
        }
        if grid_search(&prob, &grid_cfg).ok().as_ref() != Some(&grid) {
            nondeterministic += 1;
        }
        let warm = if grid.s_active.is_empty() {
            None
        } else {
            lm_solve_from(
                &prob,
                &grid.s_active,
                &grid.i_active,
                &grid.allocation,
                grid.v,
                grid.w,
                &lm,
            )
            .ok()
        };
        match warm {
            Some(rep) if rep.converged() => {
                if rep.residual_norm >= 1e-10 {
                    residual_bad += 1;
                }
                if (rep.solution.allocation.total_power() - prob.power()).abs() > 1e-10 * prob.power() {
                    budget_bad += 1;
                }
                if (rep.solution.rate - grid.rate).abs() <= 5e-3 * grid.rate {
                    agree_warm += 1;
                }
            }
            Some(_) => {}
            None => agree_warm += usize::from(grid.s_active.is_empty()),
        }
        if let Ok(cold) = lm_search(&prob, &lm) {
            if (cold.rate - grid.rate).abs() <= 5e-3 * grid.rate {
                agree_cold += 1;
            }
        }
    }
    let need = (0.95 * n as f64).ceil() as usize;

    vec![
        check(
            "solvers",
            "water_filling_example",
            example,
            format!("m=[4,1], P=1 -> {p:?}"),
        ),
        check(
            "solvers",
            "water_filling_budget",
            budget <= 1e-12,
            format!("max relative error {budget:.2e}"),
        ),
        check(
            "solvers",
            "water_filling_slackness",
            slack <= 1e-12,
            format!("max relative violation {slack:.2e}"),
        ),
        check(
            "solvers",
            "lm_warm_agreement",
            agree_warm >= need,
            format!("{agree_warm}/{n} within 0.5%"),
        ),
        check(
            "solvers",
            "lm_cold_agreement",
            agree_cold >= need,
            format!("{agree_cold}/{n} within 0.5%"),
        ),
        check(
            "solvers",
            "lm_residual",
            residual_bad == 0,
            format!("{residual_bad} converged runs above 1e-10"),
        ),
        check(
            "solvers",
            "budget_exactness",
            budget_bad == 0,
            format!("{budget_bad} violations"),
        ),
        check(
            "solvers",
            "determinism",
            nondeterministic == 0,
            format!("{nondeterministic} differing re-runs"),
        ),
    ]
}

fn finite(seed: u64) -> Vec<Check> {
    let mut rng = realization_rng(seed, 5);

    let mut rounding_bad = 0;
    for _ in 0..500 {
        let s = rng.random_range(1..=5);
        let raw: Vec<f64> = (0..s).map(|_| rng.random::<f64>() + 1e-3).collect();
        let sum: f64 = raw.iter().sum();
        let t: Vec<f64> = raw.iter().map(|x| x / sum).collect();
        let ny = rng.random_range(1..=200);
        match round_partition(&t, ny) {
            Ok(r) => {
                let kept_positive = r
                    .counts
                    .iter()
                    .enumerate()
                    .all(|(i, &c)| c > 0 || r.dropped.contains(&i));
                if r.counts.iter().sum::<usize>() != ny || !kept_positive {
                    rounding_bad += 1;
                }
            }
            Err(_) => rounding_bad += 1,
        }
    }

    let small = SimulationConfig {
        m_t: 8,
        m_r: 8,
        nx: 8,
        ny: 8,
        l1: 2,
        l2: 2,
        l3: 1,
        ..SimulationConfig::default()
    };
    let single = SimulationConfig {
        l1: 1,
        l2: 1,
        l3: 0,
        ..small.clone()
    };
    let (mut monotone_bad, mut invariance) = (0usize, 0.0f64);
    let mut errors = 0usize;
    for s in 0..10u64 {
        let mut chan = realization_rng(seed.wrapping_add(s), 6);
        let run = |cfg: &SimulationConfig, chan: &mut ChaCha8Rng| -> rispart::Result<_> {
            let real = ChannelRealization::sample(cfg, chan)?;
            let prob = rispart::asymptotic::coefficients(&real, &optimal_pairing(cfg.l1, cfg.l2), cfg)?;
            let sol = solve(&prob, &SolveOptions::default())?;
            adapt_solution(&prob, &sol, &real, chan)
        };
        match run(&small, &mut chan) {
            Ok(eval) => {
                let once = refine_common_phases(&eval, 1, 16);
                let twice = refine_common_phases(&once, 1, 16);
                if once.rate < eval.rate || twice.rate < once.rate {
                    monotone_bad += 1;
                }
            }
            Err(_) => errors += 1,
        }
        match run(&single, &mut chan) {
            Ok(eval) => {
                for k in 0..8 {
                    let r = eval.rate_at(&[2.0 * PI * k as f64 / 8.0]);
                    invariance = invariance.max((r - eval.rate).abs() / eval.rate.max(1.0));
                }
            }
            Err(_) => errors += 1,
        }
    }

    let mut eigen_bad = 0;
    for _ in 0..50 {
        let m = rng.random_range(2..=8);
        let k = rng.random_range(1..=m.min(3));
        let mut basis = CMatrix::zeros(m, k);
        let mut rx = CMatrix::zeros(m, k);
        let gains: Vec<f64> = (0..k).map(|_| log_uniform(&mut rng, 0.1, 10.0)).collect();
        let offset = rng.random_range(0..m);
        for j in 0..k {
            basis.set_column(
                j,
                &steering_vector(2.0 * ((offset + j) % m) as f64 / m as f64, m).expect("m >= 1"),
            );
            rx.set_column(j, &steering_vector(2.0 * j as f64 / m as f64, m).expect("m >= 1"));
        }
        let sigma = CMatrix::from_fn(k, k, |i, j| if i == j { gains[i].into() } else { 0.0.into() });
        let h = &rx * sigma * basis.adjoint();
        let power = log_uniform(&mut rng, 0.01, 100.0);
        let (p, _) = water_filling(&gains.iter().map(|g| g * g).collect::<Vec<_>>(), power).expect("valid input");
        let q = eigenmode_covariance(&basis, &p).expect("matching sizes");
        let iso = CMatrix::identity(m, m) * num_complex::Complex64::from(power / m as f64);
        let (a, b) = (logdet_rate(&h, &q, 1.0), logdet_rate(&h, &iso, 1.0));
        if !matches!((a, b), (Ok(a), Ok(b)) if a >= b - 1e-9) {
            eigen_bad += 1;
        }
    }

    let mut direct_err = 0.0f64;
    for s in 0..5u64 {
        let mut chan = realization_rng(seed.wrapping_add(s), 7);
        let cfg = small.clone();
        let Ok(mut real) = ChannelRealization::sample(&cfg, &mut chan) else {
            errors += 1;
            continue;
        };
        let Ok(prob) = rispart::asymptotic::coefficients(&real, &optimal_pairing(2, 2), &cfg) else {
            errors += 1;
            continue;
        };
        real.path_loss.cascaded = 0.0;
        let mut alloc = Allocation::zeros(prob.s(), prob.l3());
        alloc.p_d[0] = prob.power();
        alloc.t[0] = 1.0;
        let rate = rate_value(&prob, &alloc);
        let sol = rispart::asymptotic::Solution {
            allocation: alloc,
            v: 0.0,
            w: 0.0,
            s_active: vec![],
            i_active: vec![0],
            rate,
        };
        match adapt_solution(&prob, &sol, &real, &mut chan) {
            Ok(eval) => direct_err = direct_err.max((eval.rate - rate).abs()),
            Err(_) => errors += 1,
        }
    }

    vec![
        check(
            "finite",
            "rounding_feasibility",
            rounding_bad == 0,
            format!("{rounding_bad} of 500 roundings infeasible"),
        ),
        check(
            "finite",
            "refinement_monotone",
            monotone_bad == 0,
            format!("{monotone_bad} of 10 decreased"),
        ),
        check(
            "finite",
            "single_subsurface_phase_invariance",
            invariance < 1e-9,
            format!("max relative change {invariance:.2e}"),
        ),
        check(
            "finite",
            "eigenmode_vs_isotropic",
            eigen_bad == 0,
            format!("{eigen_bad} of 50 orthonormal cases lost"),
        ),
        check(
            "finite",
            "direct_only_rate",
            direct_err < 1e-9,
            format!("max |error| {direct_err:.2e}"),
        ),
        check(
            "finite",
            "evaluations",
            errors == 0,
            format!("{errors} evaluation errors"),
        ),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names() {
        assert_eq!("gains".parse::<Suite>().unwrap(), Suite::Gains);
        assert_eq!("bogus".parse::<Suite>().unwrap_err().exit_code(), 2);
    }

    #[test]
    fn gains_suite_passes() {
        let checks = run_suite(Suite::Gains, 0);
        assert!(checks.iter().all(|c| c.passed), "{checks:#?}");
    }

    #[test]
    fn finite_suite_passes() {
        let checks = run_suite(Suite::Finite, 0);
        assert!(checks.iter().all(|c| c.passed), "{checks:#?}");
    }
}
