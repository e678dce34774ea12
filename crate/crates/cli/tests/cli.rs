use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn scenario(name: &str) -> PathBuf {
    root().join("fixtures/scenarios").join(format!("{name}.json"))
}

fn cube() -> PathBuf {
    root().join("fixtures/meshes/cube.obj")
}

fn massid(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_massid"))
        .arg("--out-dir")
        .arg(out)
        .args(args)
        .env_remove("MASSID_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn ok(out: &Path, args: &[&str]) -> String {
    let o = massid(out, args);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn csv_rows(p: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(p).unwrap().records().map(|r| r.unwrap()).collect()
}

#[test]
fn simulate_writes_every_state_and_is_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let sc = scenario("planar_100");
    ok(dir.path(), &["simulate", s(&sc), "-o", "a.jsonl"]);
    ok(dir.path(), &["simulate", s(&sc), "-o", "b.jsonl"]);
    let a = std::fs::read_to_string(dir.path().join("a.jsonl")).unwrap();
    assert_eq!(a.lines().count(), 1 + 500 + 1, "header plus steps + 1 samples");
    assert_eq!(a, std::fs::read_to_string(dir.path().join("b.jsonl")).unwrap());
    assert!(dir.path().join("a.jsonl.manifest.json").exists());
}

#[test]
fn explicit_divergence_exits_3_with_the_step() {
    let dir = tempfile::tempdir().unwrap();
    let o = massid(dir.path(), &["simulate", "--integrator", "explicit", "--mass", "0.001", s(&scenario("stiff"))]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("diverged at step"));
    assert!(!dir.path().join("trajectory.jsonl").exists());
}

#[test]
fn malformed_scenario_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"mesh\": 3}").unwrap();
    assert_eq!(code(&massid(dir.path(), &["simulate", s(&bad)])), 2);
    assert_eq!(code(&massid(dir.path(), &["simulate", "--bogus-flag", s(&bad)])), 2);
}

#[test]
fn gen_data_counts_and_noise_overrides() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["gen-data", "--kind", "demos", s(&cube())]);
    let demos = std::fs::read_to_string(dir.path().join("demos.jsonl")).unwrap();
    assert_eq!(demos.lines().count(), 200);

    let sc = scenario("density_125");
    ok(dir.path(), &["--seed", "4", "gen-data", s(&sc), "-o", "x.jsonl"]);
    ok(dir.path(), &["--seed", "4", "gen-data", s(&sc), "-o", "y.jsonl"]);
    ok(dir.path(), &["--seed", "4", "gen-data", s(&sc), "--pos-sigma", "0.01", "-o", "z.jsonl"]);
    let read = |n: &str| std::fs::read(dir.path().join(n)).unwrap();
    assert_eq!(read("x.jsonl"), read("y.jsonl"));
    assert_ne!(read("x.jsonl"), read("z.jsonl"));
    let mx = read_json(&dir.path().join("x.jsonl.manifest.json"));
    let mz = read_json(&dir.path().join("z.jsonl.manifest.json"));
    assert_eq!(mx["config"]["noise"]["pos_sigma"], 0.002);
    assert_eq!(mz["config"]["noise"]["pos_sigma"], 0.01);
    assert_eq!(mz["config"]["noise"]["z_bias"], 0.005);
    assert_eq!(mz["seeds"]["noise"], 4);
}

#[test]
fn identify_recovers_noiseless_mass_and_writes_curves() {
    let dir = tempfile::tempdir().unwrap();
    let sc = scenario("planar_100");
    ok(dir.path(), &["gen-data", s(&sc), "-o", "real.jsonl"]);
    let real = dir.path().join("real.jsonl");
    let out = ok(dir.path(), &["--json", "identify", s(&sc), s(&real)]);
    let v: Value = serde_json::from_str(out.trim()).unwrap();
    let m = v["m_hat"].as_f64().unwrap();
    assert!((m - 0.1).abs() / 0.1 <= 0.01, "{m}");
    let report = read_json(&dir.path().join("identify.json"));
    assert_eq!(report["m_hat"].as_f64(), Some(m));
    let rows = csv_rows(&dir.path().join("identify.curve.csv"));
    assert_eq!(rows.len(), report["m_curve"].as_array().unwrap().len());
}

#[test]
fn light_mass_from_small_prior_overshoots_then_recovers() {
    let dir = tempfile::tempdir().unwrap();
    let sc = scenario("planar_050");
    ok(dir.path(), &["gen-data", s(&sc), "-o", "real.jsonl"]);
    ok(dir.path(), &["identify", "--m-init", "0.002", s(&sc), s(&dir.path().join("real.jsonl"))]);
    let r = read_json(&dir.path().join("identify.json"));
    let m: Vec<f64> = r["m_curve"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert!(m[0] < 0.05);
    assert!(m.iter().cloned().fold(0.0, f64::max) > 0.05);
    assert!((r["m_hat"].as_f64().unwrap() - 0.05).abs() < 5e-4);
}

#[test]
fn identify_error_paths() {
    let dir = tempfile::tempdir().unwrap();
    let o = massid(dir.path(), &["identify", s(&scenario("planar_100")), "/definitely/missing.jsonl"]);
    assert_eq!(code(&o), 2);

    let sc = scenario("unforced");
    ok(dir.path(), &["gen-data", s(&sc), "-o", "u.jsonl"]);
    let o = massid(dir.path(), &["identify", s(&sc), s(&dir.path().join("u.jsonl"))]);
    assert_eq!(code(&o), 4);
    assert!(String::from_utf8_lossy(&o.stderr).contains("mass unobservable"));
}

#[test]
fn ablate_on_stiff_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let sc = scenario("stiff");
    ok(dir.path(), &["--seed", "2", "gen-data", s(&sc), "-o", "real.jsonl"]);
    ok(dir.path(), &["ablate", s(&sc), s(&dir.path().join("real.jsonl"))]);
    let rows = csv_rows(&dir.path().join("ablation.csv"));
    assert_eq!(rows.len(), 2);
    assert_eq!((&rows[0][0], &rows[1][0]), ("semi", "explicit"));
    for r in &rows {
        assert!(r[3].parse::<f64>().unwrap() > 0.0);
    }
    let err = |r: &csv::StringRecord| r[2].parse::<f64>().unwrap_or(f64::INFINITY);
    assert!(err(&rows[0]) < err(&rows[1]));
    assert!(rows[1][4].parse::<usize>().unwrap() >= 1);
}

#[test]
fn gradcheck_pass_fail_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let sc = scenario("free_push");
    let out = ok(dir.path(), &["--json", "gradcheck", s(&sc), "--mass", "0.06"]);
    let v: Value = serde_json::from_str(out.trim()).unwrap();
    assert!(v["rel_err"].as_f64().unwrap() <= 1e-6, "{v}");
    assert_eq!(serde_json::to_value(serde_json::from_str::<Value>(&v.to_string()).unwrap()).unwrap(), v);

    let o = massid(dir.path(), &["gradcheck", s(&sc), "--threshold", "1e-12"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn train_policy_phases_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["--seed", "1", "gen-data", "--kind", "demos", s(&cube()), "--count", "1", "-o", "one.jsonl"]);
    let one = d.join("one.jsonl");
    ok(d, &["train-policy", s(&one), "--phase", "1", "--epochs-phase1", "300", "--batch-size", "1", "-o", "p1.bin"]);
    let rows = csv_rows(&d.join("p1.curve.csv"));
    assert_eq!(rows.len(), 300);
    let action: f64 = rows.last().unwrap()[2].parse().unwrap();
    assert!(action <= 1e-4, "{action}");

    ok(d, &["--seed", "2", "gen-data", "--kind", "demos", s(&cube()), "--count", "24", "-o", "demos.jsonl"]);
    let demos = d.join("demos.jsonl");
    let args = ["--seed", "9", "train-policy", s(&demos), "--epochs-phase1", "3", "--epochs-phase2", "2"];
    ok(d, &[&args[..], &["-o", "a.bin"]].concat());
    ok(d, &[&args[..], &["-o", "b.bin"]].concat());
    assert_eq!(std::fs::read(d.join("a.bin")).unwrap(), std::fs::read(d.join("b.bin")).unwrap());
    let phases: Vec<String> = csv_rows(&d.join("a.curve.csv")).iter().map(|r| r[0].to_string()).collect();
    assert_eq!(phases, ["1", "1", "1", "2", "2"]);

    ok(d, &["train-policy", s(&demos), "--phase", "2", "--init", s(&d.join("a.bin")), "--epochs-phase2", "1", "-o", "c.bin"]);
    assert_eq!(code(&massid(d, &["train-policy", s(&demos), "--phase", "2"])), 2);
    std::fs::write(d.join("empty.jsonl"), "").unwrap();
    assert_eq!(code(&massid(d, &["train-policy", s(&d.join("empty.jsonl"))])), 2);
}

#[test]
fn eval_policy_oracle_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(dir.path(), &["eval-policy", "--oracle", "--mass-input", "eval", "--mesh", s(&cube())]);
    let rows = csv_rows(&dir.path().join("cross_mass.csv"));
    assert_eq!(rows.len(), 9);
    assert!(rows.iter().all(|r| &r[4] == "1.0"));
    assert_eq!(out.matches("diagonal dominant").count(), 3);
}

#[test]
fn rerun_reproduces_data_files() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let sc = scenario("density_082");
    ok(&a, &["--seed", "7", "gen-data", s(&sc), "-o", "real.jsonl"]);
    ok(&a, &["identify", s(&sc), s(&a.join("real.jsonl")), "-o", "id.json"]);
    for m in ["real.jsonl", "id.json"] {
        ok(&b, &["rerun", s(&a.join(format!("{m}.manifest.json")))]);
    }
    for f in ["real.jsonl", "id.json", "id.curve.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}
