use serde_json::Value;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn data(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/data").join(rel)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dynplan")).args(args).output().expect("binary runs")
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

/// Drops wall-clock fields, which are the only ones a fixed seed does not
/// reproduce.
fn strip_timing(v: &mut Value) {
    match v {
        Value::Object(m) => {
            m.retain(|k, _| !k.contains("time") && !k.contains("speedup"));
            m.values_mut().for_each(strip_timing);
        }
        Value::Array(a) => a.iter_mut().for_each(strip_timing),
        _ => {}
    }
}

#[test]
fn acrobot_plan_writes_all_outputs_and_validates() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["plan", s(&data("configs/acrobot_swingup.cfg")), "--out-dir", s(dir.path())]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 101);
    assert!(csv.starts_with("t,q_0,q_1,dq_0"));
    let stats = read_json(&dir.path().join("stats.json"));
    assert_eq!(stats["success"], Value::Bool(true));
    assert!(stats["iterations"].as_u64().unwrap() > 0);
    let plot = std::fs::read_to_string(dir.path().join("plot.dat")).unwrap();
    assert!(plot.starts_with('#'));
    assert_eq!(plot.lines().nth(1).unwrap().split_whitespace().count(), 1 + 2 + 2);
    assert!(dir.path().join("trajectory.json").exists());

    let v = run(&["validate", s(&dir.path().join("trajectory.csv")), "--config", s(&data("configs/acrobot_swingup.cfg"))]);
    assert_eq!(code(&v), 0, "{}", String::from_utf8_lossy(&v.stdout));
    let report: Value = serde_json::from_slice(&v.stdout).unwrap();
    assert_eq!(report["passed"], Value::Bool(true));
}

#[test]
fn inverted_limits_are_a_config_error_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let model = std::fs::read_to_string(data("models/rr_planar.toml")).unwrap().replacen("q_min = -3.14159", "q_min = 4.0", 1);
    std::fs::write(dir.path().join("bad.toml"), model).unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(
        &cfg,
        "model_file = \"bad.toml\"\nhorizon = 1.0\nsteps = 4\nstart = { q = [0.0, 0.0] }\ngoal = { q = [0.1, 0.0] }\n",
    )
    .unwrap();
    let out = run(&["plan", s(&cfg)]);
    assert_eq!(code(&out), 1);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("joints[0].limits"), "{err}");
}

#[test]
fn two_step_hold_succeeds_and_stats_flag_writes_json() {
    let dir = tempfile::tempdir().unwrap();
    let stats = dir.path().join("s.json");
    let out = run(&["plan", s(&data("configs/rr_hold.cfg")), "--steps", "2", "--json-stats", s(&stats)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = read_json(&stats);
    assert_eq!(v["counts"]["variables"].as_u64(), Some(3 * 7 * 2));
}

#[test]
fn replan_compare_reports_both_times_and_ratio() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "replan",
        s(&data("configs/arm3_reach.cfg")),
        "--new-goal",
        "0.9,0.35,-0.5",
        "--compare",
        "--out-dir",
        s(dir.path()),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = read_json(&dir.path().join("replan_stats.json"));
    let c = &v["compare"];
    let inc = c["incremental_ms"].as_f64().unwrap();
    let warm = c["batch_warm_ms"].as_f64().unwrap();
    assert!((c["speedup_vs_warm"].as_f64().unwrap() - warm / inc).abs() < 1e-9);
    assert!(v["reeliminated_keys"].as_u64().unwrap() > 0);
    assert!(dir.path().join("original.csv").exists() && dir.path().join("replanned.csv").exists());
}

fn csv_values(p: &Path) -> Vec<f64> {
    std::fs::read_to_string(p)
        .unwrap()
        .lines()
        .skip(1)
        .flat_map(|l| l.split(',').map(|x| x.parse::<f64>().unwrap()).collect::<Vec<_>>())
        .collect()
}

#[test]
fn identical_goal_replan_reproduces_the_original() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["replan", s(&data("configs/arm3_reach.cfg")), "--new-goal", "0.8,0.4,-0.6", "--out-dir", s(dir.path())]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let a = csv_values(&dir.path().join("original.csv"));
    let b = csv_values(&dir.path().join("replanned.csv"));
    assert_eq!(a.len(), b.len());
    let gap = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(gap <= 1e-9, "{gap}");
}

#[test]
fn malformed_goal_is_a_usage_error() {
    let out = run(&["replan", s(&data("configs/arm3_reach.cfg")), "--new-goal", "0.9,0.35"]);
    assert_eq!(code(&out), 1);
    let out = run(&["replan", s(&data("configs/arm3_reach.cfg")), "--new-goal", "0.9,abc,1"]);
    assert_eq!(code(&out), 1);
    assert_eq!(code(&run(&["frobnicate"])), 1);
}

#[test]
fn single_trial_benchmark_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let mut outs = Vec::new();
    for name in ["a.json", "b.json"] {
        let p = dir.path().join(name);
        let o = run(&["benchmark", s(&data("suites/no_min_torque.toml")), "--trials", "1", "--seed", "5", "--out", s(&p)]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        let mut v = read_json(&p);
        for key in ["success_rate", "avg_time", "max_time", "avg_total_torque"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        strip_timing(&mut v);
        outs.push(v);
    }
    assert_eq!(outs[0], outs[1]);
    assert_eq!(outs[0]["results"].as_array().unwrap().len(), 1);
}

#[test]
fn replan_benchmark_has_three_columns() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("r.json");
    let o = run(&["benchmark", s(&data("suites/replan.toml")), "--trials", "1", "--out", s(&p)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v = read_json(&p);
    for col in ["DFGP-L", "DFGP-W", "iDFGP"] {
        assert!(v[col]["success_rate"].is_number(), "{col}");
    }
}

#[test]
fn suite_schema_error_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.toml");
    std::fs::write(&p, "config = \"x.cfg\"\ntrails = 3\n").unwrap();
    assert_eq!(code(&run(&["benchmark", s(&p)])), 1);
}

#[test]
fn validate_flags_corruption_and_model_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["plan", s(&data("configs/rr_hold.cfg")), "--out-dir", s(dir.path())]);
    assert_eq!(code(&out), 0);
    let csv = dir.path().join("trajectory.csv");
    assert_eq!(code(&run(&["validate", s(&csv), "--model", "rr_planar"])), 0);

    // add 1 N·m to every tau_1 entry
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    let col = header.split(',').position(|h| h == "tau_1").unwrap();
    let mut bad = vec![header.to_string()];
    for l in lines {
        let mut f: Vec<String> = l.split(',').map(String::from).collect();
        f[col] = (f[col].parse::<f64>().unwrap() + 1.0).to_string();
        bad.push(f.join(","));
    }
    let corrupt = dir.path().join("corrupt.csv");
    std::fs::write(&corrupt, bad.join("\n") + "\n").unwrap();
    let v = run(&["validate", s(&corrupt), "--model", "rr_planar"]);
    assert_eq!(code(&v), 2);
    let report: Value = serde_json::from_slice(&v.stdout).unwrap();
    assert!((report["max_dynamics_defect"].as_f64().unwrap() - 1.0).abs() < 1e-6);

    assert_eq!(code(&run(&["validate", s(&csv), "--model", "arm3"])), 1);
    std::fs::write(dir.path().join("junk.csv"), "t,q_0\n1,2,3\n").unwrap();
    assert_eq!(code(&run(&["validate", s(&dir.path().join("junk.csv")), "--model", "rr_planar"])), 1);
}
