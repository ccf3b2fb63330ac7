use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn regenera(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_regenera"));
    cmd.args(args);
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn solve(dir: &Path, body: &str) -> PathBuf {
    let cfg = write_config(dir, "run.json", body);
    let out = regenera(&["solve", cfg.to_str().unwrap()], &[]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    PathBuf::from(stdout(&out).trim())
}

fn vertex_count(path: &Path) -> usize {
    fs::read_to_string(path).unwrap().lines().filter(|l| l.starts_with("v ")).count()
}

fn manifest(run: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(run.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn solve_mesh_verify_n1() {
    let tmp = tempfile::tempdir().unwrap();
    let run = solve(tmp.path(), r#"{"n": 1, "T2_0": 0.5, "x": 0.2}"#);
    assert!(run.starts_with(tmp.path().join("runs")));
    assert!(!run.join("run.lock").exists());

    let m = manifest(&run);
    assert_eq!(m["status"], "converged");
    let steps = m["steps"].as_array().unwrap();
    assert_eq!(steps.len(), 5);
    for s in steps {
        assert!(s["final_residual"].as_f64().unwrap() <= 1e-10);
    }

    let out = regenera(&["mesh", run.to_str().unwrap(), "--x", "0.2"], &[]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stdout(&out).contains("A_1,1"));
    assert!(stdout(&out).contains("0 crossing pairs"));
    let obj = run.join("meshes/mesh-x0.200000.obj");
    let closure: serde_json::Value = serde_json::from_str(&fs::read_to_string(run.join("meshes/closure-x0.200000.json")).unwrap()).unwrap();
    assert!(closure["max_defect"].as_f64().unwrap() <= 1e-6);
    let text = fs::read_to_string(&obj).unwrap();
    let nv = vertex_count(&obj);
    for line in text.lines().filter(|l| l.starts_with("f ")) {
        let idx: Vec<usize> = line[2..].split_whitespace().map(|t| t.parse().unwrap()).collect();
        assert_eq!(idx.len(), 3);
        assert!(idx.iter().all(|&i| i >= 1 && i <= nv));
    }

    let out = regenera(&["verify", run.to_str().unwrap()], &[]);
    assert_eq!(code(&out), 0, "{}{}", stdout(&out), stderr(&out));
    assert!(!stdout(&out).contains("FAIL"));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(run.join("verify.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], true);
    // at x = 0 the conformality residuals are exact zeros up to rounding
    let seed_conf = report["suites"].as_array().unwrap().iter().find(|s| s["suite"] == "conformality L(Q)" && s["x"] == 0.0).unwrap();
    assert!(seed_conf["value"].as_f64().unwrap() <= 1e-12);
}

#[test]
fn seed_meshes_one_per_sphere_and_replication() {
    let tmp = tempfile::tempdir().unwrap();
    let run = solve(tmp.path(), r#"{"n": 2, "T2_0": 0.5, "x": 0.0}"#);
    let out = regenera(&["mesh", run.to_str().unwrap(), "--x", "0"], &[]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let meshes: Vec<PathBuf> = fs::read_dir(run.join("meshes")).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(meshes.iter().filter(|p| p.extension().is_some_and(|e| e == "obj")).count(), 4);
    let base: Vec<usize> = (1..=4).map(|m| vertex_count(&run.join(format!("meshes/sphere-{m}-x0.000000.obj")))).collect();

    let out = regenera(&["mesh", run.to_str().unwrap(), "--x", "0", "--replicate", "3x2"], &[]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    for m in 1..=4 {
        assert_eq!(vertex_count(&run.join(format!("meshes/sphere-{m}-x0.000000.obj"))), 6 * base[m - 1]);
    }

    let out = regenera(&["verify", run.to_str().unwrap()], &[]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
}

#[test]
fn inadmissible_angles_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "a.json", r#"{"n": 1, "T2_0": 1.0, "x": 0.2}"#);
    let out = regenera(&["solve", cfg.to_str().unwrap()], &[]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("-1 < T2 < 1"), "{}", stderr(&out));

    let cfg = write_config(tmp.path(), "b.json", r#"{"n": 2, "T2_0": 0.0, "x": 0.2}"#);
    let out = regenera(&["solve", cfg.to_str().unwrap()], &[]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("0 < |T2| < 1"));
    assert!(!tmp.path().join("runs").exists());
}

#[test]
fn unknown_keys_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "a.json", r#"{"n": 1, "T2_0": 0.5, "x": 0.2, "tolerence": 1e-8}"#);
    let out = regenera(&["solve", cfg.to_str().unwrap()], &[]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("tolerence"));

    let cfg = write_config(tmp.path(), "b.json", r#"{"n": 1, "T2_0": 0.5, "x": 0.2, "necks": [{"k": 1, "i": 1, "u": 1, "v": 0, "w": 2}]}"#);
    assert_eq!(code(&regenera(&["solve", cfg.to_str().unwrap()], &[])), 2);
}

#[test]
fn tampered_embeddedness_fails_verify() {
    let tmp = tempfile::tempdir().unwrap();
    let run = solve(tmp.path(), r#"{"n": 1, "T2_0": 0.5, "x": 0.1, "schedule": [0.0, 0.05, 0.1]}"#);
    let step = run.join("step-x0.100000.json");
    let mut v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&step).unwrap()).unwrap();
    let g = &mut v["params"]["gamma_even"][0][0];
    *g = serde_json::json!(g.as_f64().unwrap() + 0.01);
    fs::write(&step, serde_json::to_string(&v).unwrap()).unwrap();

    let out = regenera(&["verify", run.to_str().unwrap()], &[]);
    assert_eq!(code(&out), 5);
    assert!(stdout(&out).contains("FAIL embeddedness"));
    assert!(stderr(&out).contains("embeddedness"));
}

#[test]
fn locked_run_directory_is_refused() {
    let tmp = tempfile::tempdir().unwrap();
    let run = solve(tmp.path(), r#"{"n": 1, "T2_0": 0.5, "x": 0.0}"#);
    fs::write(run.join("run.lock"), "1\n").unwrap();
    let out = regenera(&["verify", run.to_str().unwrap()], &[]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("locked"));
    let cfg = tmp.path().join("run.json");
    assert_eq!(code(&regenera(&["solve", cfg.to_str().unwrap()], &[])), 2);
}

#[test]
fn run_names_are_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let a = solve(tmp.path(), r#"{"n": 1, "T2_0": 0.5, "x": 0.0}"#);
    let b = solve(tmp.path(), r#"{"n": 1, "T2_0": 0.5, "x": 0.0}"#);
    assert_eq!(a, b);
    let c = solve(tmp.path(), r#"{"n": 1, "T2_0": 0.3, "x": 0.0}"#);
    assert_ne!(a, c);
}

#[test]
fn mesh_at_unsolved_x_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let run = solve(tmp.path(), r#"{"n": 1, "T2_0": 0.5, "x": 0.0}"#);
    let out = regenera(&["mesh", run.to_str().unwrap(), "--x", "0.3"], &[]);
    assert_eq!(code(&out), 2);
}

#[test]
fn goldens_rows_at_half() {
    let out = regenera(&["goldens", "--t2", "0.5"], &[]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let mut rdr = csv::Reader::from_reader(out.stdout.as_slice());
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    let find = |id: &str| rows.iter().find(|r| &r[0] == id).unwrap_or_else(|| panic!("row {id}")).clone();
    let b = find("b-derivative");
    assert_eq!((&b[1], &b[3]), ("−2πi(T₂−1)³/(T₂+1)", "0.5235988i"));
    let t = find("t_{2k,1}-derivative");
    assert_eq!((&t[1], &t[3]), ("16πiT₂(T₂−1)/(T₂+1)²", "-5.5850536i"));
    let w = find("(z−1)-weighted t-derivative");
    assert_eq!((&w[1], &w[3]), ("4πi(1−T₂²)", "9.4247780i"));
    for r in &rows {
        assert!(r[8].parse::<f64>().unwrap() <= 1e-6, "{r:?}");
    }
}

#[test]
fn goldens_reject_inadmissible_angles() {
    assert_eq!(code(&regenera(&["goldens", "--t2", "0.5,-1"], &[])), 2);
    assert_eq!(code(&regenera(&["goldens", "--t2", "0", "--n", "2"], &[])), 2);
    assert_eq!(code(&regenera(&["goldens", "--t2", "0", "--n", "1"], &[])), 0);
}

#[test]
fn thread_cap_is_validated() {
    assert_eq!(code(&regenera(&["goldens", "--t2", "0.5"], &[("REGENERA_THREADS", "zero")])), 2);
    assert_eq!(code(&regenera(&["goldens", "--t2", "0.5"], &[("REGENERA_THREADS", "1")])), 0);
}

#[test]
fn solver_failure_exits_3_and_records_x() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "f.json", r#"{"n": 1, "T2_0": 0.5, "x": 0.1, "max_iterations": 0}"#);
    let out = regenera(&["solve", cfg.to_str().unwrap()], &[]);
    assert_eq!(code(&out), 3);
    let run = PathBuf::from(stdout(&out).trim());
    let m = manifest(&run);
    assert_eq!(m["status"], "failed");
    let x = m["failed_x"].as_f64().unwrap();
    assert!(x > 0.0 && x < 0.1);
    // the exact seed at x = 0 is kept
    assert_eq!(m["steps"].as_array().unwrap().len(), 1);
    assert!(!run.join("run.lock").exists());
}
