use std::path::Path;
use std::process::Command;

use darkpot::optimizer::read_sweep_csv;
use darkpot::qsim::read_qsim_csv;
use darkpot_cli::config::{load, RunConfig};
use darkpot_cli::{run, EXIT_CONFIG, EXIT_EMPTY, EXIT_FAILURE, EXIT_INFEASIBLE, EXIT_OK};
use serde_json::Value;

fn darkpot(cmd: &str, out: &Path, sets: &[&str]) -> i32 {
    let mut args = vec!["darkpot".to_owned(), cmd.to_owned(), "--out".to_owned(), out.display().to_string()];
    for s in sets {
        args.push("--set".to_owned());
        args.push((*s).to_owned());
    }
    run(args)
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn defaults_and_partial_overrides() {
    let cfg = load(None, &[]).unwrap();
    assert_eq!(cfg, RunConfig::default());
    let cfg = load(None, &["candidate.d0_over_d=0.2".into(), "noise.s1=1e-9".into()]).unwrap();
    assert_eq!(cfg.candidate.d0_over_d, 0.2);
    assert_eq!(cfg.candidate.a, -1);
    assert_eq!(cfg.noise.s1, 1e-9);
    assert_eq!(cfg.noise.l_bar, 1e6);
}

#[test]
fn config_file_then_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.json");
    std::fs::write(&path, r#"{"noise": {"s2": 1e-7}, "optimize": {"seeds": 12}, "rng_seed": 3}"#).unwrap();
    let cfg = load(Some(&path), &["optimize.seeds=20".into()]).unwrap();
    assert_eq!(cfg.noise.s2, 1e-7);
    assert_eq!(cfg.optimize.seeds, 20);
    assert_eq!(cfg.rng_seed, 3);
    assert_eq!(cfg.optimize.local_tol, 1e-6);
}

#[test]
fn bad_configuration_exits_64() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(darkpot("trace", dir.path(), &["candidate.colour=1"]), EXIT_CONFIG);
    assert_eq!(darkpot("trace", dir.path(), &["nonsense"]), EXIT_CONFIG);
    assert_eq!(darkpot("trace", dir.path(), &["noise.s1=-1"]), EXIT_CONFIG);
    assert_eq!(darkpot("trace", dir.path(), &["candidate.a=7"]), EXIT_CONFIG);
    assert_eq!(run(["darkpot", "frobnicate"]), EXIT_CONFIG);
}

#[test]
fn trace_writes_all_files() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(darkpot("trace", dir.path(), &["candidate.d0_over_d=0.3", "noise.s1=1e-9"]), EXIT_OK);
    for f in ["trajectory.csv", "gaussian.csv", "cubicity.csv", "summary.json"] {
        assert!(dir.path().join(f).is_file(), "{f} missing");
    }
    let s = read_json(&dir.path().join("summary.json"));
    assert_eq!(s["feasible"], true);
    assert!(s["max_K"].as_f64().unwrap() > 0.0);
}

#[test]
fn tiny_offset_is_infeasible() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(darkpot("trace", dir.path(), &["candidate.d0_over_d=1e-5"]), EXIT_INFEASIBLE);
    let s = read_json(&dir.path().join("summary.json"));
    assert_eq!(s["feasible"], false);
    assert!(s["violation"].as_str().unwrap().contains("period"));
}

#[test]
fn impossible_gas_time_leaves_nothing() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(darkpot("optimize", dir.path(), &["params.t_gas_bar=1", "optimize.seeds=8"]), EXIT_EMPTY);
    assert!(!dir.path().join("result.json").exists());
}

#[test]
fn qsim_refuses_wide_potentials() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(darkpot("qsim", dir.path(), &[]), EXIT_CONFIG);
}

#[test]
fn optimize_is_byte_identical_for_a_seed() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let sets = ["optimize.seeds=24", "noise.s1=1e-9", "rng_seed=11"];
    assert_eq!(darkpot("optimize", a.path(), &sets), EXIT_OK);
    assert_eq!(darkpot("optimize", b.path(), &sets), EXIT_OK);
    let ra = std::fs::read(a.path().join("result.json")).unwrap();
    let rb = std::fs::read(b.path().join("result.json")).unwrap();
    assert_eq!(ra, rb);
    let doc: Value = serde_json::from_slice(&ra).unwrap();
    assert_eq!(doc["rng_seed"], 11);
    assert_eq!(doc["per_sign_best"].as_array().unwrap().len(), 4);
    for key in ["merit_kind", "noise", "best", "constraints", "evaluations"] {
        assert!(doc.get(key).is_some(), "{key} missing");
    }
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["darkpot", "optimize", "--out", dir.path().to_str().unwrap(), "--seed", "9", "--set", "optimize.seeds=8"];
    assert_eq!(run(args), EXIT_OK);
    assert_eq!(read_json(&dir.path().join("result.json"))["rng_seed"], 9);
}

#[test]
fn sweep_csv_is_monotone() {
    let dir = tempfile::tempdir().unwrap();
    let sets = ["optimize.seeds=16", "sweep.values=[1e-10,1e-9,1e-8]"];
    assert_eq!(darkpot("sweep", dir.path(), &sets), EXIT_OK);
    let rows = read_sweep_csv(std::fs::File::open(dir.path().join("sweep.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows.iter().map(|r| r.s1).collect::<Vec<_>>(), [1e-10, 1e-9, 1e-8]);
    for w in rows.windows(2) {
        assert!(w[1].merit_max <= w[0].merit_max, "{} then {}", w[0].merit_max, w[1].merit_max);
    }
    assert_eq!(read_json(&dir.path().join("sweep_failures.json")), Value::Array(vec![]));
}

#[test]
fn oracle_passes_then_catches_a_mutation() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(darkpot("oracle", dir.path(), &[]), EXIT_OK);
    assert_eq!(darkpot("oracle", dir.path(), &["oracle.dephasing_scale=1.01"]), EXIT_FAILURE);
    let report = read_json(&dir.path().join("oracle.json"));
    let failed: Vec<&str> = report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["passed"] == false)
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    assert!(failed.contains(&"constant_dephasing_growth"), "{failed:?}");
    assert!(!failed.contains(&"free_covariance"));
}

#[test]
fn oracle_at_machine_precision_fails() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(darkpot("oracle", dir.path(), &["oracle.tolerance=1e-14"]), EXIT_FAILURE);
}

#[test]
fn binary_runs_a_small_desk_benchmark() {
    let dir = tempfile::tempdir().unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_darkpot"))
        .args(["qsim", "--out"])
        .arg(dir.path())
        .args(["--set", "params.d_bar=64", "--set", "params.l_bar=64", "--set", "params.omega_ratio=0.05"])
        .args(["--set", "noise.l_bar=64", "--set", "noise.s1=1e-3", "--set", "candidate.d0_over_d=0.05"])
        .args(["--set", "qsim.n_points=128", "--set", "qsim.dt_bar=0.15", "--set", "qsim.samples=10"])
        .env("DARKPOT_THREADS", "1")
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(EXIT_OK));
    let rows = read_qsim_csv(std::fs::File::open(dir.path().join("qsim_trace.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 11);
    assert!(rows.iter().all(|r| r.trace_error.abs() < 1e-9));
    let summary = read_json(&dir.path().join("qsim_summary.json"));
    for key in ["argmax_K", "argmax_NW", "max_NW"] {
        assert!(summary[key].is_number(), "{key}");
    }
    assert!(dir.path().join("wigner_peak.bin").is_file());
}
