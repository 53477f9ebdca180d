//! Monte-Carlo sweeps.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use rispart::asymptotic::{coefficients, optimal_pairing};
use rispart::channel::{realization_rng, ChannelRealization, SimulationConfig};
use rispart::finite::{adapt_solution, refine_common_phases};
use rispart::solver::{single_path_solution, solve, SolveOptions, SolverKind};

use crate::config::{solver_name, ExperimentSpec, PsiMode, ResolvedSpec};
use crate::error::{HarnessError, Result};

/// Phase-refinement settings used with [`PsiMode::Refine`].
pub const REFINE_SWEEPS: usize = 2;
pub const REFINE_GRID: usize = 64;

/// One realization at one sweep value. Rates are in bit/s/Hz.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub sweep_value: f64,
    pub seed: u64,
    pub solver: SolverKind,
    pub psi: PsiMode,
    pub rate_asymptotic: f64,
    pub rate_finite: f64,
    /// Asymptotic rate with the whole surface on the strongest pair.
    pub rate_single_path: f64,
    pub active_cascaded: usize,
    pub active_direct: usize,
    pub s_min_star: usize,
    /// Power was re-water-filled after a sub-surface rounded to zero columns.
    pub reallocated: bool,
    /// `None` on success, otherwise the failure message (rates are then 0).
    pub failure: Option<String>,
    pub wall_ms: f64,
}

pub const CSV_HEADER: [&str; 13] = [
    "sweep_value",
    "seed",
    "solver",
    "psi",
    "rate_asymptotic",
    "rate_finite",
    "rate_single_path",
    "active_cascaded",
    "active_direct",
    "s_min_star",
    "reallocated",
    "status",
    "message",
];

impl ResultRow {
    fn record(&self) -> Vec<String> {
        vec![
            format!("{}", self.sweep_value),
            self.seed.to_string(),
            solver_name(self.solver).into(),
            self.psi.to_string(),
            format!("{:.12e}", self.rate_asymptotic),
            format!("{:.12e}", self.rate_finite),
            format!("{:.12e}", self.rate_single_path),
            self.active_cascaded.to_string(),
            self.active_direct.to_string(),
            self.s_min_star.to_string(),
            u8::from(self.reallocated).to_string(),
            if self.failure.is_some() { "failed" } else { "ok" }.into(),
            self.failure.clone().unwrap_or_default(),
        ]
    }
}

/// Aggregates for one sweep value over the successful rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub sweep_value: f64,
    pub label: String,
    pub rows: usize,
    pub failed: usize,
    pub mean_rate_asymptotic: f64,
    pub mean_rate_finite: f64,
    pub mean_rate_single_path: f64,
    pub mean_active_cascaded: f64,
    pub mean_active_direct: f64,
    /// Occurrences of each activated cascaded-path count `0..=min(L1, L2)`.
    pub cascaded_histogram: Vec<usize>,
    /// Occurrences of each activated direct-path count `0..=L3`.
    pub direct_histogram: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub rows: Vec<ResultRow>,
    pub summary: Vec<SummaryRow>,
}

struct Outcome {
    rate_asymptotic: f64,
    rate_finite: f64,
    rate_single_path: f64,
    active_cascaded: usize,
    active_direct: usize,
    s_min_star: usize,
    reallocated: bool,
}

fn evaluate(
    config: &SimulationConfig,
    master_seed: u64,
    seed: u64,
    options: &SolveOptions,
    psi: PsiMode,
) -> rispart::Result<Outcome> {
    let mut rng = realization_rng(master_seed, seed);
    let realization = ChannelRealization::sample(config, &mut rng)?;
    let problem = coefficients(&realization, &optimal_pairing(config.l1, config.l2), config)?;
    let solution = solve(&problem, options)?;
    let single = single_path_solution(&problem)?;
    let mut eval = adapt_solution(&problem, &solution, &realization, &mut rng)?;
    if psi == PsiMode::Refine {
        eval = refine_common_phases(&eval, REFINE_SWEEPS, REFINE_GRID);
    }
    Ok(Outcome {
        rate_asymptotic: solution.rate,
        rate_finite: eval.rate,
        rate_single_path: single.rate,
        active_cascaded: solution.s_active.len(),
        active_direct: solution.i_active.len(),
        s_min_star: solution.s_min_star(),
        reallocated: eval.reallocated,
    })
}

/// Runs one realization; numerical failures are recorded in the row.
pub fn run_realization(spec: &ExperimentSpec, config: &SimulationConfig, sweep_value: f64, seed: u64) -> ResultRow {
    let options = SolveOptions {
        solver: spec.solver,
        ..SolveOptions::default()
    };
    let start = Instant::now();
    let outcome = evaluate(config, spec.seed, seed, &options, spec.psi);
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    let mut row = ResultRow {
        sweep_value,
        seed,
        solver: spec.solver,
        psi: spec.psi,
        rate_asymptotic: 0.0,
        rate_finite: 0.0,
        rate_single_path: 0.0,
        active_cascaded: 0,
        active_direct: 0,
        s_min_star: 0,
        reallocated: false,
        failure: None,
        wall_ms,
    };
    match outcome {
        Ok(o) => {
            row.rate_asymptotic = o.rate_asymptotic;
            row.rate_finite = o.rate_finite;
            row.rate_single_path = o.rate_single_path;
            row.active_cascaded = o.active_cascaded;
            row.active_direct = o.active_direct;
            row.s_min_star = o.s_min_star;
            row.reallocated = o.reallocated;
        }
        Err(e) => row.failure = Some(e.to_string()),
    }
    row
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

fn summarize(spec: &ExperimentSpec, rows: &[ResultRow]) -> Vec<SummaryRow> {
    let max_s = spec.config.l1.min(spec.config.l2);
    spec.sweep
        .points(&spec.config)
        .into_iter()
        .map(|point| {
            let all: Vec<&ResultRow> = rows.iter().filter(|r| r.sweep_value == point.value).collect();
            let ok: Vec<&ResultRow> = all.iter().copied().filter(|r| r.failure.is_none()).collect();
            let mut cascaded_histogram = vec![0; max_s + 1];
            let mut direct_histogram = vec![0; spec.config.l3 + 1];
            for r in &ok {
                cascaded_histogram[r.active_cascaded] += 1;
                direct_histogram[r.active_direct] += 1;
            }
            SummaryRow {
                sweep_value: point.value,
                label: point.label,
                rows: all.len(),
                failed: all.len() - ok.len(),
                mean_rate_asymptotic: mean(ok.iter().map(|r| r.rate_asymptotic)),
                mean_rate_finite: mean(ok.iter().map(|r| r.rate_finite)),
                mean_rate_single_path: mean(ok.iter().map(|r| r.rate_single_path)),
                mean_active_cascaded: mean(ok.iter().map(|r| r.active_cascaded as f64)),
                mean_active_direct: mean(ok.iter().map(|r| r.active_direct as f64)),
                cascaded_histogram,
                direct_histogram,
            }
        })
        .collect()
}

/// Every (sweep value, realization) pair, evaluated on `jobs` workers
/// (all cores when `None`). Row order is (sweep value, seed) regardless of
/// scheduling. Realization `r` draws from stream `r` of the master seed at
/// every sweep value, so sweep points share their path geometries.
pub fn run_experiment(spec: &ExperimentSpec, jobs: Option<usize>) -> Result<ExperimentOutput> {
    spec.validate()?;
    let points = spec.sweep.points(&spec.config);
    let tasks: Vec<(usize, u64)> = (0..points.len())
        .flat_map(|p| (0..spec.realizations as u64).map(move |r| (p, r)))
        .collect();
    let work = || -> Vec<ResultRow> {
        tasks
            .par_iter()
            .map(|&(p, r)| run_realization(spec, &points[p].config, points[p].value, r))
            .collect()
    };
    let mut rows = match jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| HarnessError::Config(format!("cannot start {n} workers: {e}")))?
            .install(work),
        None => work(),
    };
    rows.sort_by(|a, b| a.sweep_value.total_cmp(&b.sweep_value).then(a.seed.cmp(&b.seed)));
    let summary = summarize(spec, &rows);
    Ok(ExperimentOutput { rows, summary })
}

/// Paths of the files written next to the results CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputPaths {
    pub results: PathBuf,
    pub summary: PathBuf,
    pub metadata: PathBuf,
    pub timing: PathBuf,
}

impl OutputPaths {
    pub fn for_results(results: &Path) -> Self {
        let with = |suffix: &str| {
            let mut name = results.file_stem().unwrap_or_default().to_os_string();
            name.push(suffix);
            results.with_file_name(name)
        };
        OutputPaths {
            results: results.to_path_buf(),
            summary: with(".summary.csv"),
            metadata: with(".meta.toml"),
            timing: with(".timing.csv"),
        }
    }
}

pub fn write_results<W: Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for row in rows {
        w.write_record(row.record())?;
    }
    w.flush().map_err(|e| HarnessError::io("<results>", e))?;
    Ok(())
}

pub fn write_summary<W: Write>(summary: &[SummaryRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "sweep_value",
        "label",
        "rows",
        "failed",
        "mean_rate_asymptotic",
        "mean_rate_finite",
        "mean_rate_single_path",
        "mean_active_cascaded",
        "mean_active_direct",
        "cascaded_histogram",
        "direct_histogram",
    ])?;
    let join = |h: &[usize]| h.iter().map(usize::to_string).collect::<Vec<_>>().join(" ");
    for s in summary {
        w.write_record([
            format!("{}", s.sweep_value),
            s.label.clone(),
            s.rows.to_string(),
            s.failed.to_string(),
            format!("{:.12e}", s.mean_rate_asymptotic),
            format!("{:.12e}", s.mean_rate_finite),
            format!("{:.12e}", s.mean_rate_single_path),
            format!("{:.6}", s.mean_active_cascaded),
            format!("{:.6}", s.mean_active_direct),
            join(&s.cascaded_histogram),
            join(&s.direct_histogram),
        ])?;
    }
    w.flush().map_err(|e| HarnessError::io("<summary>", e))?;
    Ok(())
}

/// `git describe` of the working directory, or `unknown` outside a repository.
pub fn git_describe() -> String {
    std::process::Command::new("git")
        .args(["describe", "--always", "--dirty", "--tags"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "unknown".into())
}

/// Writes results, summary and metadata; wall times go to a separate file so
/// the other three are byte-identical across re-runs.
pub fn write_outputs(spec: &ExperimentSpec, output: &ExperimentOutput, results: &Path) -> Result<OutputPaths> {
    let paths = OutputPaths::for_results(results);
    if let Some(dir) = results.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }
    let create = |p: &Path| std::fs::File::create(p).map_err(|e| HarnessError::io(p, e));
    write_results(&output.rows, create(&paths.results)?)?;
    write_summary(&output.summary, create(&paths.summary)?)?;
    let meta = ResolvedSpec::new(spec, git_describe()).to_toml();
    std::fs::write(&paths.metadata, meta).map_err(|e| HarnessError::io(&paths.metadata, e))?;
    let mut w = csv::Writer::from_writer(create(&paths.timing)?);
    w.write_record(["sweep_value", "seed", "wall_ms"])?;
    for row in &output.rows {
        w.write_record([
            format!("{}", row.sweep_value),
            row.seed.to_string(),
            format!("{:.3}", row.wall_ms),
        ])?;
    }
    w.flush().map_err(|e| HarnessError::io(&paths.timing, e))?;
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Sweep;

    fn tiny_spec() -> ExperimentSpec {
        let config = SimulationConfig {
            m_t: 8,
            m_r: 8,
            nx: 8,
            ny: 8,
            l1: 2,
            l2: 3,
            l3: 1,
            ..SimulationConfig::default()
        };
        ExperimentSpec {
            config,
            sweep: Sweep::Surface(vec![(8, 16), (8, 8)]),
            solver: SolverKind::Grid,
            psi: PsiMode::Random,
            out: "unused.csv".into(),
            realizations: 3,
            seed: 5,
        }
    }

    #[test]
    fn rows_are_sorted_and_complete() {
        let out = run_experiment(&tiny_spec(), Some(2)).unwrap();
        let keys: Vec<(f64, u64)> = out.rows.iter().map(|r| (r.sweep_value, r.seed)).collect();
        assert_eq!(
            keys,
            vec![(64.0, 0), (64.0, 1), (64.0, 2), (128.0, 0), (128.0, 1), (128.0, 2)]
        );
        assert!(out.rows.iter().all(|r| r.failure.is_none() && r.rate_finite >= 0.0));
        assert!(out.rows.iter().all(|r| r.active_cascaded <= 2 && r.active_direct <= 1));
        assert!(out.rows.iter().all(|r| r.rate_asymptotic >= r.rate_single_path - 1e-9));
        assert_eq!(out.summary.len(), 2);
        assert_eq!(out.summary[0].cascaded_histogram.iter().sum::<usize>(), 3);
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let a = run_experiment(&tiny_spec(), Some(1)).unwrap();
        let b = run_experiment(&tiny_spec(), Some(3)).unwrap();
        let mut x = Vec::new();
        let mut y = Vec::new();
        write_results(&a.rows, &mut x).unwrap();
        write_results(&b.rows, &mut y).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn failed_realizations_are_flagged() {
        let spec = tiny_spec();
        let row = run_realization(
            &spec,
            &SimulationConfig {
                nx: 0,
                ..spec.config.clone()
            },
            1.0,
            0,
        );
        assert!(row.failure.is_some());
        assert_eq!(row.rate_finite, 0.0);
        let mut buf = Vec::new();
        write_results(&[row], &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().contains(",failed,"));
    }

    #[test]
    fn sidecar_names() {
        let p = OutputPaths::for_results(Path::new("/tmp/run/fig4.csv"));
        assert_eq!(p.summary, Path::new("/tmp/run/fig4.summary.csv"));
        assert_eq!(p.metadata, Path::new("/tmp/run/fig4.meta.toml"));
        assert_eq!(p.timing, Path::new("/tmp/run/fig4.timing.csv"));
    }
}
