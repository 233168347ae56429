use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_drsmpc"))
}

fn scenarios_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

// Stable diagonal plant with K = 0: the terminal box is invariant and the
// zero feedback is trivially admissible.
const CONTRACTIVE: &str = r#"
schema = 1
name = "contractive"

[model]
a = [[0.5, 0.0], [0.0, 0.6]]
b = [[1.0], [0.0]]

[noise]
family = "gaussian"
covariance = [[0.001, 0.0], [0.0, 0.001]]

[cost]
q = [[1.0, 0.0], [0.0, 1.0]]
r = [[1.0]]
horizon = 4

[[constraints]]
kind = "state"
direction = [1.0, 0.0]
bound = 1.0
epsilon = 0.2

[[constraints]]
kind = "state"
direction = [0.0, 1.0]
bound = 1.0
epsilon = 0.2

[simulation]
steps = 10
x0 = [0.5, -0.5]

[overrides]
k = [[0.0, 0.0]]
"#;

#[test]
fn simulate_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let outs: Vec<PathBuf> = ["a", "b", "c"].iter().map(|n| dir.path().join(n)).collect();
    for (out, jobs) in outs.iter().zip(["0", "0", "1"]) {
        let o = run(&[
            "simulate", "--scenario", "buck_boost", "--method", "dr", "--runs", "6", "--steps",
            "12", "--seed", "11", "--jobs", jobs, "--out", out.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for file in ["runs.csv", "stats.csv", "summary.txt"] {
        let first = std::fs::read(outs[0].join(file)).unwrap();
        assert!(!first.is_empty());
        for other in &outs[1..] {
            assert_eq!(first, std::fs::read(other.join(file)).unwrap(), "{file}");
        }
    }
    let runs = std::fs::read_to_string(outs[0].join("runs.csv")).unwrap();
    assert_eq!(runs.lines().count(), 1 + 6 * 12);
}

#[test]
fn certify_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("contractive.toml");
    std::fs::write(&good, CONTRACTIVE).unwrap();
    let report = dir.path().join("report.json");
    let o = run(&["certify", "--scenario", good.to_str().unwrap(), "--out", report.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(&report).unwrap()).unwrap();
    assert_eq!(v["certificate"]["invariant"], "holds");
    assert_eq!(v["certificate"]["input_admissible"], "holds");

    // published gain: the terminal box is not invariant
    let o = run(&["certify", "--scenario", "buck_boost"]);
    assert_eq!(o.status.code(), Some(2));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["s_reference_max_abs_diff"].as_f64().unwrap() < 0.05);
    assert_eq!(v["certificate"]["invariant"], "fails");

    // steady velocity variance exceeds epsilon * bound²
    let o = run(&["certify", "--scenario", "two_mass_spring"]);
    assert_eq!(o.status.code(), Some(2));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["terminal_error"].is_string());
}

#[test]
fn solve_reports_trajectory_or_infeasibility() {
    let o = run(&["solve", "--scenario", "buck_boost", "--x0", "-0.5,0.25", "--method", "cantelli"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["status"], "optimal");
    assert_eq!(v["nominal_states"].as_array().unwrap().len(), 9);
    assert_eq!(v["nominal_inputs"].as_array().unwrap().len(), 8);
    assert_eq!(v["nominal_states"][0][0], -0.5);

    let o = run(&["solve", "--scenario", "buck_boost", "--x0", "5,0"]);
    assert_eq!(o.status.code(), Some(2));

    let o = run(&["solve", "--scenario", "buck_boost", "--x0", "1,2,3"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn scenario_files_load() {
    for name in ["buck_boost", "two_mass_spring", "buck_boost_input_chance"] {
        let path = scenarios_dir().join(format!("{name}.toml"));
        let o = run(&["certify", "--scenario", path.to_str().unwrap()]);
        assert!(matches!(o.status.code(), Some(0 | 2)), "{name}");
        let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
        assert_eq!(v["scenario"], name);
    }
    let o = run(&["certify", "--scenario", "no_such_thing"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("built-in"));
}

#[test]
fn feasible_set_writes_grid() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "feasible-set", "--scenario", "buck_boost", "--method", "dr", "--grid",
        "-2.5:2.5:0.5,-3.5:3.5:0.5", "--out", dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("feasible.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 11 * 15);
    // the stage-0 slab is the raw bound, so nothing outside the box is feasible
    for line in csv.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let (x, y): (f64, f64) = (f[1].parse().unwrap(), f[2].parse().unwrap());
        if x.abs() > 2.0 || y.abs() > 3.0 {
            assert_eq!(f[3], "0", "{line}");
        }
    }
    let o = run(&["feasible-set", "--scenario", "buck_boost", "--grid", "0:1", "--out", "/tmp/x"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn simulate_infeasible_start_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "simulate", "--scenario", "two_mass_spring", "--runs", "2", "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let summary = std::fs::read_to_string(dir.path().join("summary.txt")).unwrap();
    assert!(summary.contains("completed = 0"));
}
