use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rispart::solver::SolveOptions;
use rispart_harness::config::{parse_solver, PsiMode};
use rispart_harness::error::{HarnessError, Result};
use rispart_harness::experiment::{run_experiment, write_outputs};
use rispart_harness::fig3::{fig3_regions, prefix_label, write_regions};
use rispart_harness::problem::{format_solution, load_problem, solve_problem};
use rispart_harness::verify::{run_suite, Suite};
use rispart_harness::ExperimentSpec;

#[derive(Parser)]
#[command(name = "rispart", version, about = "RIS partitioning simulator and solvers")]
struct Cli {
    /// Master seed (overrides the experiment file).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output path (overrides the experiment file).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// grid | lm | both
    #[arg(long, global = true)]
    solver: Option<String>,
    /// random | refine
    #[arg(long, global = true)]
    psi: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte-Carlo sweep described by an experiment file.
    Simulate { spec: PathBuf },
    /// Solve one asymptotic problem file.
    Solve { problem: PathBuf },
    /// Optimal share pattern versus transmit SNR.
    Fig3 {
        /// Paired-path strengths, non-increasing.
        #[arg(long, value_delimiter = ',', default_value = "93,74,54,15")]
        m: Vec<f64>,
        /// lo:hi:step in dB.
        #[arg(long, default_value = "-20:15:0.01")]
        snr: String,
    },
    /// Run a verification suite: lemmas | propositions | gains | solvers | finite | all.
    Verify { suite: String },
}

fn parse_range(s: &str) -> Result<(f64, f64, f64)> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || HarnessError::Config(format!("SNR range {s:?} is not lo:hi:step"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let v: Vec<f64> = parts
        .iter()
        .map(|p| p.trim().parse().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    Ok((v[0], v[1], v[2]))
}

fn simulate(cli: &Cli, path: &Path) -> Result<()> {
    let mut spec = ExperimentSpec::load(path)?;
    if let Some(seed) = cli.seed {
        spec.seed = seed;
        spec.config.seed = seed;
    }
    if let Some(out) = &cli.out {
        spec.out = out.clone();
    }
    if let Some(s) = &cli.solver {
        spec.solver = parse_solver(s)?;
    }
    if let Some(p) = &cli.psi {
        spec.psi = p.parse::<PsiMode>()?;
    }
    for warning in spec.config.validate()? {
        eprintln!("warning: {warning}");
    }
    let output = run_experiment(&spec, cli.jobs)?;
    let paths = write_outputs(&spec, &output, &spec.out)?;
    println!(
        "{:>12} {:>8} {:>7} {:>12} {:>12} {:>12} {:>9} {:>9}",
        spec.sweep.name(),
        "rows",
        "failed",
        "asymptotic",
        "finite",
        "single",
        "cascaded",
        "direct"
    );
    for s in &output.summary {
        println!(
            "{:>12} {:>8} {:>7} {:>12.4} {:>12.4} {:>12.4} {:>9.3} {:>9.3}",
            s.label,
            s.rows,
            s.failed,
            s.mean_rate_asymptotic,
            s.mean_rate_finite,
            s.mean_rate_single_path,
            s.mean_active_cascaded,
            s.mean_active_direct
        );
    }
    println!("results: {}", paths.results.display());
    Ok(())
}

fn run(cli: &Cli) -> Result<ExitCode> {
    match &cli.command {
        Command::Simulate { spec } => simulate(cli, spec)?,
        Command::Solve { problem } => {
            let prob = load_problem(problem)?;
            let options = SolveOptions {
                solver: cli
                    .solver
                    .as_deref()
                    .map_or(Ok(SolveOptions::default().solver), parse_solver)?,
                ..SolveOptions::default()
            };
            let sol = solve_problem(&prob, &options)?;
            print!("{}", format_solution(&prob, &sol));
        }
        Command::Fig3 { m, snr } => {
            let (lo, hi, step) = parse_range(snr)?;
            let table = fig3_regions(m, lo, hi, step)?;
            for (snr, k) in &table.transitions {
                println!("{snr:>8.2} dB  {}", prefix_label(*k, m.len()));
            }
            let show = |t: Option<f64>| t.map_or("none in range".to_string(), |x| format!("{x:.2} dB"));
            println!("all-plus exists from: {}", show(table.existence_threshold));
            println!("all-plus optimal from: {}", show(table.optimality_threshold));
            if let Some(out) = &cli.out {
                let file = std::fs::File::create(out).map_err(|e| HarnessError::io(out, e))?;
                write_regions(&table, file)?;
            }
        }
        Command::Verify { suite } => {
            let suite: Suite = suite.parse()?;
            let checks = run_suite(suite, cli.seed.unwrap_or(0));
            for c in &checks {
                println!("{c}");
            }
            if checks.iter().any(|c| !c.passed) {
                return Ok(ExitCode::from(1));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
