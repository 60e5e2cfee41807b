use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn qpiston(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qpiston"))
        .arg("-o")
        .arg(out)
        .args(args)
        .env_remove("QPISTON_OUT")
        .output()
        .unwrap()
}

fn ok(out: &Path, args: &[&str]) {
    let o = qpiston(out, args);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn csv_rows(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(|v| v.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

#[test]
fn plan_outputs() {
    let dir = TempDir::new().unwrap();
    ok(dir.path(), &["plan", "--gamma", "10"]);
    ok(dir.path(), &["plan", "--gamma", "10", "--method", "inverse"]);

    let opt = json(&dir.path().join("plan_optimal.json"));
    assert!((opt["total"].as_f64().unwrap() - 3.4295).abs() < 1e-4);
    assert_eq!(opt["certificate"]["pass"], Value::Bool(true));
    let inv = json(&dir.path().join("plan_inverse.json"));
    assert!((inv["total"].as_f64().unwrap() - 6.2511).abs() < 1e-3);

    let (header, rows) = csv_rows(&dir.path().join("plan_optimal_trajectory.csv"));
    assert_eq!(header[0], "t");
    let last = rows.last().unwrap();
    assert!((last[1] - 10.0).abs() < 1e-9 && last[2].abs() < 1e-9, "{last:?}");
    assert!(rows.iter().all(|r| r[1] > 0.0));

    ok(dir.path(), &["plan", "--gamma", "1.0001"]);
    let near = json(&dir.path().join("plan_optimal.json"));
    assert!(near["total"].as_f64().unwrap() < 0.03);
}

#[test]
fn sweep_matches_plan() {
    let dir = TempDir::new().unwrap();
    ok(dir.path(), &["sweep"]);
    let (header, rows) = csv_rows(&dir.path().join("sweep.csv"));
    assert_eq!(header, ["gamma", "t_optimal", "t_inverse"]);
    assert_eq!(rows.len(), 50);
    let last = rows.last().unwrap();
    assert_eq!(last[0], 10.0);
    assert!((last[1] - 3.429544262866).abs() < 1e-10);
    assert!(rows.iter().all(|r| r[1] < r[2]));

    ok(dir.path(), &["sweep", "--gamma-min", "2", "--gamma-max", "2", "--points", "1"]);
    assert_eq!(csv_rows(&dir.path().join("sweep.csv")).1.len(), 1);
}

#[test]
fn reruns_are_byte_identical() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    for d in [&a, &b] {
        ok(d.path(), &["sweep", "--points", "7", "--spacing", "log"]);
        ok(d.path(), &["plan", "--format", "json"]);
    }
    for f in ["sweep.csv", "plan_optimal_control.json", "plan_optimal_trajectory.json", "plan_optimal.json"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let code = |args: &[&str]| qpiston(dir.path(), args).status.code();
    assert_eq!(code(&["plan", "--gamma", "0.5"]), Some(2));
    assert_eq!(code(&["plan", "--no-such-flag"]), Some(2));
    assert_eq!(code(&["otto", "--tau-c", "2"]), Some(2));
    assert_eq!(code(&["otto", "--tau-c", "0.5", "--gamma", "1.01"]), Some(3));
    assert_eq!(code(&["simulate", "--gamma", "2", "--grid", "64", "--dt", "0.5"]), Some(2));
    assert_eq!(code(&["plan", "--gamma", "3"]), Some(0));
}

#[test]
fn output_directory_from_environment() {
    let dir = TempDir::new().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_qpiston"))
        .args(["plan", "--gamma", "2"])
        .env("QPISTON_OUT", dir.path())
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(dir.path().join("plan_optimal.json").exists());
}

#[test]
fn config_file_with_flag_override() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# sweep settings\ngamma_max = 4\npoints = 5\n").unwrap();
    let cfg = cfg.to_str().unwrap();
    ok(dir.path(), &["--config", cfg, "sweep"]);
    let rows = csv_rows(&dir.path().join("sweep.csv")).1;
    assert_eq!((rows.len(), rows[4][0]), (5, 4.0));
    ok(dir.path(), &["--config", cfg, "sweep", "--points", "3"]);
    let rows = csv_rows(&dir.path().join("sweep.csv")).1;
    assert_eq!((rows.len(), rows[2][0]), (3, 4.0));
}

#[test]
fn physical_units_round_trip() {
    let dir = TempDir::new().unwrap();
    let (mass, k0, a0): (f64, f64, f64) = (1.44e-25, 1e-20, 1e-6);
    ok(dir.path(), &["plan", "--gamma", "10"]);
    let norm = json(&dir.path().join("plan_optimal.json"))["total"].as_f64().unwrap();
    ok(dir.path(), &["--units", "physical", "--mass", "1.44e-25", "--k0", "1e-20", "--a0", "1e-6", "plan", "--gamma", "10"]);
    let si = json(&dir.path().join("plan_optimal.json"));
    let t0 = (mass / k0).sqrt();
    assert!((si["total"].as_f64().unwrap() / t0 - norm).abs() < 1e-12 * norm);
    let (_, rows) = csv_rows(&dir.path().join("plan_optimal_trajectory.csv"));
    assert!((rows.last().unwrap()[1] / a0 - 10.0).abs() < 1e-9);

    let o = qpiston(dir.path(), &["--units", "physical", "plan"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn simulate_ramps_and_superposition() {
    let dir = TempDir::new().unwrap();
    ok(dir.path(), &["simulate", "--gamma", "4", "--grid", "128", "--dt", "2e-4", "--ramp-delta", "0,0.1,0.05"]);
    let runs = json(&dir.path().join("simulate.json"))["runs"].as_array().unwrap().clone();
    let f: Vec<f64> = runs.iter().map(|r| r["final_fidelity"].as_f64().unwrap()).collect();
    assert!(f[0] > 1.0 - 1e-10, "{f:?}");
    assert!((f[1] - 0.98789).abs() < 2e-4 && f[2] > f[1] && f[2] < f[0], "{f:?}");
    let (_, fid) = csv_rows(&dir.path().join("simulate_delta0_fidelity.csv"));
    assert!(fid.iter().all(|r| r[1] > 1.0 - 1e-10));

    ok(dir.path(), &["simulate", "--gamma", "3", "--grid", "128", "--dt", "2e-4", "--modes", "3"]);
    let (header, pops) = csv_rows(&dir.path().join("simulate_populations.csv"));
    assert_eq!(header, ["n", "initial", "final"]);
    for r in &pops[..3] {
        assert!((r[1] - 1.0 / 3.0).abs() < 1e-10 && (r[2] - r[1]).abs() < 1e-8, "{r:?}");
    }
    let run = &json(&dir.path().join("simulate.json"))["runs"][0];
    assert!((run["energy_ratio"].as_f64().unwrap() * 9.0 - 1.0).abs() < 1e-6);
}

#[test]
fn otto_and_certify() {
    let dir = TempDir::new().unwrap();
    ok(dir.path(), &["otto", "--tau-c", "0.01,0.001"]);
    let res = json(&dir.path().join("otto.json"))["results"].as_array().unwrap().clone();
    let r: Vec<f64> = res.iter().map(|x| x["optimal"]["R_star"].as_f64().unwrap()).collect();
    assert!((r[0] - 9.8140e-4).abs() < 1e-7 && (r[1] - 7.8651e-5).abs() < 1e-8, "{r:?}");
    assert!(res.iter().all(|x| x["below_bound"] == Value::Bool(true)));

    ok(dir.path(), &["certify", "--gamma", "2"]);
    let c = &json(&dir.path().join("certify.json"))["results"][0];
    assert_eq!(c["certificate"]["pass"], Value::Bool(true));
}
