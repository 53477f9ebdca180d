//! Experiment files.
//!
//! ```toml
//! [system]
//! M_t = 32
//! M_r = 32
//! N = "30x90"
//! L1 = 5
//! L2 = 7
//! L3 = 4
//! d = 0.5            # element spacing, wavelengths
//! f = 28e9           # Hz
//! d1 = 100.0         # m
//! d2 = 60.0
//! d3 = 150.0
//! path_loss_exponent = 2.4
//! P = 30.0           # dBm
//! sigma2 = -90.0     # dBm
//! B = 251.1886e6     # Hz
//!
//! [experiment]
//! sweep = "N"        # N | M | P | SNR
//! values = ["30x30", "30x60", "30x90"]
//! solver = "grid"    # grid | lm | both
//! psi = "random"     # random | refine
//! realizations = 100
//! seed = 0
//! out = "results.csv"
//! P0 = 60.103        # optional, dBm; with sweep = "M" sets P = P0 / M^2
//! ```
//!
//! Every `[system]` key is optional and defaults to the reference scenario in `SimulationConfig::default`.
//! Powers are converted from dBm to watts here and nowhere else.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rispart::channel::{dbm_to_watts, SimulationConfig};
use rispart::solver::SolverKind;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PsiMode {
    Random,
    Refine,
}

impl FromStr for PsiMode {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(PsiMode::Random),
            "refine" => Ok(PsiMode::Refine),
            _ => Err(HarnessError::Config(format!(
                "unknown psi mode {s:?} (random | refine)"
            ))),
        }
    }
}

impl fmt::Display for PsiMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PsiMode::Random => "random",
            PsiMode::Refine => "refine",
        })
    }
}

pub fn parse_solver(s: &str) -> Result<SolverKind> {
    match s {
        "grid" => Ok(SolverKind::Grid),
        "lm" => Ok(SolverKind::Lm),
        "both" => Ok(SolverKind::Both),
        _ => Err(HarnessError::Config(format!("unknown solver {s:?} (grid | lm | both)"))),
    }
}

pub fn solver_name(kind: SolverKind) -> &'static str {
    match kind {
        SolverKind::Grid => "grid",
        SolverKind::Lm => "lm",
        SolverKind::Both => "both",
    }
}

/// Parses `"30x90"` into `(30, 90)`.
pub fn parse_surface(s: &str) -> Result<(usize, usize)> {
    let bad = || HarnessError::Config(format!("surface size {s:?} is not of the form NxxNy"));
    let (a, b) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    let nx = a.trim().parse().map_err(|_| bad())?;
    let ny = b.trim().parse().map_err(|_| bad())?;
    Ok((nx, ny))
}

/// One point of a sweep, already applied to the system configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    /// Numeric sweep coordinate: element count, antenna count, dBm or dB.
    pub value: f64,
    pub label: String,
    pub config: SimulationConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Sweep {
    /// RIS sizes `(Nx, Ny)`.
    Surface(Vec<(usize, usize)>),
    /// Antennas per side, `M_t = M_r = M`; optional `P0` in watts gives `P = P0 / M^2`.
    Antennas { values: Vec<usize>, p0: Option<f64> },
    /// Transmit power, `(dBm, W)`.
    Power(Vec<(f64, f64)>),
    /// Transmit SNR `P / sigma^2` in dB.
    Snr(Vec<f64>),
}

impl Sweep {
    pub fn name(&self) -> &'static str {
        match self {
            Sweep::Surface(_) => "N",
            Sweep::Antennas { .. } => "M",
            Sweep::Power(_) => "P",
            Sweep::Snr(_) => "SNR",
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Sweep::Surface(v) => v.len(),
            Sweep::Antennas { values, .. } => values.len(),
            Sweep::Power(v) => v.len(),
            Sweep::Snr(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn points(&self, base: &SimulationConfig) -> Vec<SweepPoint> {
        match self {
            Sweep::Surface(sizes) => sizes
                .iter()
                .map(|&(nx, ny)| SweepPoint {
                    value: (nx * ny) as f64,
                    label: format!("{nx}x{ny}"),
                    config: SimulationConfig { nx, ny, ..base.clone() },
                })
                .collect(),
            Sweep::Antennas { values, p0 } => values
                .iter()
                .map(|&m| SweepPoint {
                    value: m as f64,
                    label: m.to_string(),
                    config: SimulationConfig {
                        m_t: m,
                        m_r: m,
                        transmit_power: p0.map_or(base.transmit_power, |p0| p0 / (m * m) as f64),
                        ..base.clone()
                    },
                })
                .collect(),
            Sweep::Power(values) => values
                .iter()
                .map(|&(dbm, watts)| SweepPoint {
                    value: dbm,
                    label: format!("{dbm}"),
                    config: SimulationConfig {
                        transmit_power: watts,
                        ..base.clone()
                    },
                })
                .collect(),
            Sweep::Snr(values) => values
                .iter()
                .map(|&db| SweepPoint {
                    value: db,
                    label: format!("{db}"),
                    config: SimulationConfig {
                        transmit_power: base.noise_power * 10f64.powf(db / 10.0),
                        ..base.clone()
                    },
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub config: SimulationConfig,
    pub sweep: Sweep,
    pub solver: SolverKind,
    pub psi: PsiMode,
    pub out: PathBuf,
    pub realizations: usize,
    pub seed: u64,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.sweep.is_empty() {
            return Err(HarnessError::Config("sweep has no values".into()));
        }
        if self.realizations == 0 {
            return Err(HarnessError::Config("realization count must be at least 1".into()));
        }
        for point in self.sweep.points(&self.config) {
            point
                .config
                .validate()
                .map_err(|e| HarnessError::Config(format!("sweep value {}: {e}", point.label)))?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        text.parse()
    }
}

#[derive(Debug, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct SystemSection {
    #[serde(rename = "M_t")]
    m_t: Option<usize>,
    #[serde(rename = "M_r")]
    m_r: Option<usize>,
    #[serde(rename = "N")]
    n: Option<String>,
    #[serde(rename = "L1")]
    l1: Option<usize>,
    #[serde(rename = "L2")]
    l2: Option<usize>,
    #[serde(rename = "L3")]
    l3: Option<usize>,
    d: Option<f64>,
    f: Option<f64>,
    d1: Option<f64>,
    d2: Option<f64>,
    d3: Option<f64>,
    path_loss_exponent: Option<f64>,
    #[serde(rename = "P")]
    p: Option<f64>,
    sigma2: Option<f64>,
    #[serde(rename = "B")]
    b: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExperimentSection {
    sweep: String,
    values: Vec<toml::Value>,
    solver: Option<String>,
    psi: Option<String>,
    realizations: Option<usize>,
    seed: Option<u64>,
    out: Option<PathBuf>,
    #[serde(rename = "P0")]
    p0: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecFile {
    #[serde(default)]
    system: SystemSection,
    experiment: ExperimentSection,
}

fn system_config(s: &SystemSection) -> Result<SimulationConfig> {
    let mut c = SimulationConfig::default();
    if let Some(v) = s.m_t {
        c.m_t = v;
    }
    if let Some(v) = s.m_r {
        c.m_r = v;
    }
    if let Some(n) = &s.n {
        (c.nx, c.ny) = parse_surface(n)?;
    }
    c.l1 = s.l1.unwrap_or(c.l1);
    c.l2 = s.l2.unwrap_or(c.l2);
    c.l3 = s.l3.unwrap_or(c.l3);
    c.spacing_wavelengths = s.d.unwrap_or(c.spacing_wavelengths);
    c.carrier_frequency = s.f.unwrap_or(c.carrier_frequency);
    c.d1 = s.d1.unwrap_or(c.d1);
    c.d2 = s.d2.unwrap_or(c.d2);
    c.d3 = s.d3.unwrap_or(c.d3);
    c.path_loss_exponent = s.path_loss_exponent.unwrap_or(c.path_loss_exponent);
    if let Some(p) = s.p {
        c.transmit_power = dbm_to_watts(p);
    }
    if let Some(n) = s.sigma2 {
        c.noise_power = dbm_to_watts(n);
    }
    c.bandwidth = s.b.unwrap_or(c.bandwidth);
    Ok(c)
}

fn float_values(values: &[toml::Value], what: &str) -> Result<Vec<f64>> {
    values
        .iter()
        .map(|v| match v {
            toml::Value::Float(x) => Ok(*x),
            toml::Value::Integer(i) => Ok(*i as f64),
            other => Err(HarnessError::Config(format!(
                "{what} sweep value {other} is not a number"
            ))),
        })
        .collect()
}

fn sweep_from(e: &ExperimentSection) -> Result<Sweep> {
    match e.sweep.as_str() {
        "N" => e
            .values
            .iter()
            .map(|v| match v {
                toml::Value::String(s) => parse_surface(s),
                other => Err(HarnessError::Config(format!(
                    "N sweep value {other} must be a string like \"30x90\""
                ))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Sweep::Surface),
        "M" => {
            let values = e
                .values
                .iter()
                .map(|v| match v {
                    toml::Value::Integer(i) if *i >= 1 => Ok(*i as usize),
                    other => Err(HarnessError::Config(format!(
                        "M sweep value {other} must be a positive integer"
                    ))),
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Sweep::Antennas {
                values,
                p0: e.p0.map(dbm_to_watts),
            })
        }
        "P" => Ok(Sweep::Power(
            float_values(&e.values, "P")?
                .into_iter()
                .map(|d| (d, dbm_to_watts(d)))
                .collect(),
        )),
        "SNR" => Ok(Sweep::Snr(float_values(&e.values, "SNR")?)),
        other => Err(HarnessError::Config(format!(
            "unknown sweep variable {other:?} (N | M | P | SNR)"
        ))),
    }
}

impl FromStr for ExperimentSpec {
    type Err = HarnessError;

    fn from_str(text: &str) -> Result<Self> {
        let file: SpecFile = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        let config = system_config(&file.system)?;
        let e = &file.experiment;
        if e.p0.is_some() && e.sweep != "M" {
            return Err(HarnessError::Config("P0 only applies to an M sweep".into()));
        }
        let realizations = e.realizations.unwrap_or(config.realizations);
        let seed = e.seed.unwrap_or(config.seed);
        let spec = ExperimentSpec {
            sweep: sweep_from(e)?,
            solver: e.solver.as_deref().map_or(Ok(SolverKind::Grid), parse_solver)?,
            psi: e.psi.as_deref().map_or(Ok(PsiMode::Random), str::parse)?,
            out: e.out.clone().unwrap_or_else(|| PathBuf::from("results.csv")),
            config: SimulationConfig {
                realizations,
                seed,
                ..config
            },
            realizations,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Fully resolved experiment, serialized next to the results.
#[derive(Debug, Serialize)]
pub struct ResolvedSpec {
    pub git_describe: String,
    pub sweep: String,
    pub sweep_values: Vec<String>,
    pub solver: String,
    pub psi: String,
    pub realizations: usize,
    pub seed: u64,
    pub dropped_subsurface_power: String,
    pub system: ResolvedSystem,
}

#[derive(Debug, Serialize)]
pub struct ResolvedSystem {
    #[serde(rename = "M_t")]
    pub m_t: usize,
    #[serde(rename = "M_r")]
    pub m_r: usize,
    #[serde(rename = "N")]
    pub n: String,
    #[serde(rename = "L1")]
    pub l1: usize,
    #[serde(rename = "L2")]
    pub l2: usize,
    #[serde(rename = "L3")]
    pub l3: usize,
    pub d: f64,
    pub f: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
    pub path_loss_exponent: f64,
    #[serde(rename = "P_watts")]
    pub p_watts: f64,
    #[serde(rename = "sigma2_watts")]
    pub sigma2_watts: f64,
    #[serde(rename = "B")]
    pub b: f64,
}

impl ResolvedSpec {
    pub fn new(spec: &ExperimentSpec, git_describe: String) -> Self {
        let c = &spec.config;
        ResolvedSpec {
            git_describe,
            sweep: spec.sweep.name().into(),
            sweep_values: spec.sweep.points(c).into_iter().map(|p| p.label).collect(),
            solver: solver_name(spec.solver).into(),
            psi: spec.psi.to_string(),
            realizations: spec.realizations,
            seed: spec.seed,
            dropped_subsurface_power: "water-filled over surviving streams".into(),
            system: ResolvedSystem {
                m_t: c.m_t,
                m_r: c.m_r,
                n: format!("{}x{}", c.nx, c.ny),
                l1: c.l1,
                l2: c.l2,
                l3: c.l3,
                d: c.spacing_wavelengths,
                f: c.carrier_frequency,
                d1: c.d1,
                d2: c.d2,
                d3: c.d3,
                path_loss_exponent: c.path_loss_exponent,
                p_watts: c.transmit_power,
                sigma2_watts: c.noise_power,
                b: c.bandwidth,
            },
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("resolved spec serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file_uses_table_defaults() {
        let spec: ExperimentSpec = "[experiment]\nsweep = \"P\"\nvalues = [20, 30.5]\n".parse().unwrap();
        assert_eq!(spec.config.nx * spec.config.ny, 2700);
        assert_eq!(spec.realizations, 1000);
        let points = spec.sweep.points(&spec.config);
        assert!((points[0].config.transmit_power - 0.1).abs() < 1e-15);
        assert_eq!(points[1].value, 30.5);
    }

    #[test]
    fn system_keys_override_defaults() {
        let text = "[system]\nM_t = 16\nN = \"10x20\"\nsigma2 = -80\nL3 = 0\n\n[experiment]\nsweep = \"N\"\nvalues = [\"10x10\", \"20x20\"]\nrealizations = 3\nseed = 9\nsolver = \"both\"\npsi = \"refine\"\n";
        let spec: ExperimentSpec = text.parse().unwrap();
        assert_eq!(spec.config.m_t, 16);
        assert_eq!(spec.config.l3, 0);
        assert!((spec.config.noise_power - 1e-11).abs() < 1e-25);
        assert_eq!(spec.sweep, Sweep::Surface(vec![(10, 10), (20, 20)]));
        assert_eq!((spec.realizations, spec.seed), (3, 9));
        assert_eq!((spec.solver, spec.psi), (SolverKind::Both, PsiMode::Refine));
    }

    #[test]
    fn antenna_sweep_scales_power() {
        let text = "[experiment]\nsweep = \"M\"\nvalues = [16, 32]\nP0 = 60.103\n";
        let spec: ExperimentSpec = text.parse().unwrap();
        let points = spec.sweep.points(&spec.config);
        let p0 = dbm_to_watts(60.103);
        assert!((points[1].config.transmit_power - p0 / 1024.0).abs() < 1e-12 * p0);
        assert_eq!(points[1].config.m_r, 32);
    }

    #[test]
    fn snr_sweep_is_relative_to_noise() {
        let spec: ExperimentSpec = "[experiment]\nsweep = \"SNR\"\nvalues = [10]\n".parse().unwrap();
        let p = &spec.sweep.points(&spec.config)[0];
        assert!((p.config.transmit_power / spec.config.noise_power - 10.0).abs() < 1e-9);
    }

    #[test]
    fn malformed_files_are_config_errors() {
        for text in [
            "[experiment]\nsweep = \"Q\"\nvalues = [1]\n",
            "[experiment]\nsweep = \"N\"\nvalues = []\n",
            "[experiment]\nsweep = \"N\"\nvalues = [\"30by90\"]\n",
            "[experiment]\nsweep = \"P\"\nvalues = [1]\nrealizations = 0\n",
            "[experiment]\nsweep = \"P\"\nvalues = [1]\nbogus = 1\n",
            "[system]\nM_t = 0\n[experiment]\nsweep = \"P\"\nvalues = [1]\n",
            "[experiment]\nsweep = \"P\"\nvalues = [1]\nP0 = 60\n",
            "not toml",
        ] {
            let err = text.parse::<ExperimentSpec>().unwrap_err();
            assert_eq!(err.exit_code(), 2, "{text}");
        }
    }
}
