use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn rispart(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rispart"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

const TINY: &str = r#"
[system]
M_t = 8
M_r = 8
N = "8x8"
L1 = 2
L2 = 3
L3 = 1

[experiment]
sweep = "P"
values = [0.0, 20.0, 40.0]
solver = "lm"
realizations = 4
seed = 11
"#;

fn write_spec(dir: &Path, body: &str) -> String {
    let path = dir.join("run.toml");
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn region_scan_reports_both_thresholds() {
    let out = rispart(&["fig3"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("all-plus exists from: 4.71 dB"), "{text}");
    assert!(text.contains("all-plus optimal from: 6.43 dB"), "{text}");
}

#[test]
fn simulate_writes_identical_results_on_rerun() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), TINY);
    let run = |name: &str, jobs: &str| {
        let out_path = dir.path().join(name);
        let out = rispart(&["simulate", &spec, "--out", out_path.to_str().unwrap(), "--jobs", jobs]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        out_path
    };
    let a = run("a.csv", "1");
    let b = run("b.csv", "2");
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(
        fs::read(dir.path().join("a.summary.csv")).unwrap(),
        fs::read(dir.path().join("b.summary.csv")).unwrap()
    );
    let meta = fs::read_to_string(dir.path().join("a.meta.toml")).unwrap();
    assert!(meta.contains("seed = 11"), "{meta}");
    assert!(dir.path().join("a.timing.csv").exists());
    let rows = fs::read_to_string(&a).unwrap();
    assert_eq!(rows.lines().count(), 1 + 3 * 4);
}

#[test]
fn single_path_rate_falls_behind_as_power_grows() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), TINY);
    let out_path = dir.path().join("p.csv");
    let out = rispart(&["simulate", &spec, "--out", out_path.to_str().unwrap()]);
    assert!(out.status.success());
    let mut reader = csv::Reader::from_path(dir.path().join("p.summary.csv")).unwrap();
    let headers = reader.headers().unwrap().clone();
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let (asym, single) = (col("mean_rate_asymptotic"), col("mean_rate_single_path"));
    let gaps: Vec<f64> = reader
        .records()
        .map(|r| {
            let r = r.unwrap();
            r[asym].parse::<f64>().unwrap() - r[single].parse::<f64>().unwrap()
        })
        .collect();
    assert!(gaps.iter().all(|&g| g >= -1e-9), "{gaps:?}");
    assert!(gaps.windows(2).all(|w| w[1] >= w[0]), "{gaps:?}");
}

#[test]
fn solve_prints_the_allocation() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("problem.toml");
    fs::write(&path, "m_r = [400.0, 300.0]\nm_d = [30.0]\nP = 1.0\n").unwrap();
    let out = rispart(&["solve", path.to_str().unwrap(), "--solver", "both"]);
    assert!(out.status.success());
    let text = stdout(&out);
    for key in ["rate = ", "pattern = ", "p_r = ", "t = "] {
        assert!(text.contains(key), "{text}");
    }
}

#[test]
fn usage_and_config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_spec(dir.path(), "[system]\nM_t = \"many\"\n");
    assert_eq!(rispart(&["simulate", &bad]).status.code(), Some(2));
    let unknown = write_spec(dir.path(), "[system]\nbogus = 1\n");
    assert_eq!(rispart(&["simulate", &unknown]).status.code(), Some(2));
    let missing = dir.path().join("absent.toml");
    assert_eq!(rispart(&["simulate", missing.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(rispart(&["verify", "nonsense"]).status.code(), Some(2));
    assert_eq!(rispart(&["fig3", "--snr", "0:1"]).status.code(), Some(2));
    assert_eq!(
        rispart(&["--solver", "simplex", "solve", missing.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(rispart(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn verify_gains_passes() {
    let out = rispart(&["verify", "gains"]);
    assert!(out.status.success());
    assert!(stdout(&out).lines().all(|l| l.starts_with("PASS")));
}

#[test]
fn bundled_experiment_files_load() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for name in ["surface_sweep.toml", "power_sweep.toml", "antenna_sweep.toml"] {
        let spec = rispart_harness::ExperimentSpec::load(&dir.join(name)).unwrap();
        spec.validate().unwrap();
    }
    let out = rispart(&["solve", dir.join("problem.toml").to_str().unwrap()]);
    assert!(out.status.success());
}
