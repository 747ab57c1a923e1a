use std::fs;
use std::path::Path;
use std::process::Command;

use agmon::cli::ExperimentConfig;
use agmon::report::{read_csv, read_green_binary, verify_manifest, REPORT_SCHEMA};
use serde_json::Value;

fn agmon(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_agmon")).args(args).output().expect("binary runs");
    (out.status.code().expect("exit code"), String::from_utf8_lossy(&out.stderr).into_owned())
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

fn assert_valid(doc: &Value) {
    let schema: Value = serde_json::from_str(REPORT_SCHEMA).unwrap();
    let v = jsonschema::validator_for(&schema).expect("schema compiles");
    let errors: Vec<String> = v.iter_errors(doc).map(|e| format!("{e} at {}", e.instance_path())).collect();
    assert!(errors.is_empty(), "{errors:#?}");
}

fn data(name: &str) -> String {
    format!("{}/data/{name}", env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn no_arguments_prints_usage_and_exits_2() {
    let out = Command::new(env!("CARGO_BIN_EXE_agmon")).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let text = String::from_utf8_lossy(&out.stderr).to_string() + &String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("Usage"), "{text}");
}

#[test]
fn help_exits_0() {
    assert_eq!(agmon(&["--help"]).0, 0);
}

#[test]
fn config_errors_exit_2_and_name_the_input() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"sede": 1}"#).unwrap();
    let (code, err) = agmon(&["--config", cfg.to_str().unwrap(), "aux"]);
    assert_eq!(code, 2);
    assert!(err.contains("sede"), "{err}");

    let out = dir.path().join("o");
    let (code, err) = agmon(&["--out", out.to_str().unwrap(), "--weight", "no_such.json", "aux"]);
    assert_eq!(code, 2);
    assert!(err.contains("no_such.json"), "{err}");
    assert_eq!(agmon(&["--out", out.to_str().unwrap(), "certify", "--class", "zz"]).0, 2);
    assert_eq!(agmon(&["--out", out.to_str().unwrap(), "--grid", "12", "aux"]).0, 2);
}

#[test]
fn bracket_failure_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = ExperimentConfig::default();
    // Identity crosses at r = 2^{-3/2}, outside [1, 2].
    c.aux.r_min = 1.0;
    c.aux.r_max = 2.0;
    let p = dir.path().join("c.json");
    fs::write(&p, serde_json::to_string(&c).unwrap()).unwrap();
    let out = dir.path().join("o");
    let (code, err) =
        agmon(&["--config", p.to_str().unwrap(), "--out", out.to_str().unwrap(), "--weight", "identity", "--grid", "5,1", "aux"]);
    assert_eq!(code, 3, "{err}");
    assert!(err.contains("does not cross"), "{err}");
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("c.json");
    fs::write(&p, r#"{"seed": 5, "weights": ["identity"], "counterexample": {"nc": false}}"#).unwrap();
    let out = dir.path().join("o");
    let (code, err) = agmon(&["--config", p.to_str().unwrap(), "--seed", "9", "--out", out.to_str().unwrap(), "counterexample"]);
    assert_eq!(code, 0, "{err}");
    let r = report(&out);
    assert_eq!(r["config"]["seed"], 9);
    assert_eq!(r["config"]["cert"]["seed"], 9);
    assert_eq!(r["config"]["weights"][0], "identity");
    assert!(r["sections"].get("counterexample_nc").is_none());
}

#[test]
fn counterexample_slope_is_near_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let (code, err) = agmon(&["--out", out.to_str().unwrap(), "counterexample", "--fp", "--R", "10,20,40,80"]);
    assert_eq!(code, 0, "{err}");
    let r = report(&out);
    let slope = r["sections"]["counterexample_fp"]["appendix_a"]["slope"].as_f64().unwrap();
    assert!((0.7..=1.3).contains(&slope), "{slope}");
    let rows = read_csv(&out.join("counterexample.csv")).unwrap();
    assert_eq!(rows.iter().filter(|r| r.2 == "ratio").count(), 4);
    assert_valid(&r);
    assert!(verify_manifest(&out).unwrap().is_empty());
}

#[test]
fn certify_from_weight_file_writes_per_cube_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let w = data("appendixA.json");
    let (code, err) = agmon(&["--out", out.to_str().unwrap(), "certify", "--class", "bp", "--p", "2", "--weight", &w]);
    assert_eq!(code, 0, "{err}");
    let rows = read_csv(&out.join("certify.csv")).unwrap();
    assert!(rows.iter().any(|r| r.2 == "bp_cube" && r.4.is_finite() && r.4 > 0.0));
    let pass = rows.iter().find(|r| r.2 == "bp_pass").unwrap();
    assert_eq!((pass.1.as_str(), pass.4), ("appendixA", 1.0));
    assert_valid(&report(&out));
}

#[test]
fn green_binary_matches_the_requested_pole() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let args = ["--out", out.to_str().unwrap(), "--weight", "diag_x2_x4", "--grid", "10,1.5", "green", "--pole", "4,5,4"];
    let (code, err) = agmon(&args);
    assert_eq!(code, 0, "{err}");
    let g = read_green_binary(&out.join("green_diag_x2_x4.bin")).unwrap();
    assert_eq!((g.grid.npa, g.d, g.grid.multi(g.pole)), (10, 2, vec![4, 5, 4]));
    assert!(g.blocks.iter().all(|v| v.is_finite()));
    // Positivity of the diagonal at the pole.
    assert!(g.entry(g.pole, 0, 0) > 0.0 && g.entry(g.pole, 1, 1) > 0.0);
    let slice = read_csv(&out.join("green.csv")).unwrap();
    assert_eq!(slice.iter().filter(|r| r.2 == "norm").count(), 100);
    assert_valid(&report(&out));
    assert_eq!(agmon(&["--out", out.to_str().unwrap(), "--grid", "10,1.5", "green", "--pole", "4,5,10"]).0, 2);
}

#[test]
fn field_commands_produce_valid_reports() {
    let dir = tempfile::tempdir().unwrap();
    for (cmd, extra) in [
        ("aux", vec!["--kind", "upper"]),
        ("agmon", vec!["--path-norm", "l2"]),
        ("landscape", vec!["--probes", "2"]),
        ("poincare", vec![]),
    ] {
        let out = dir.path().join(cmd);
        let mut args = vec!["--out", out.to_str().unwrap(), "--weight", "diag_x2_x4", "--grid", "9,2", cmd];
        args.extend(extra);
        let (code, err) = agmon(&args);
        assert_eq!(code, 0, "{cmd}: {err}");
        let r = report(&out);
        assert_eq!(r["command"], cmd);
        assert_valid(&r);
        assert!(verify_manifest(&out).unwrap().is_empty(), "{cmd}");
    }
}

#[test]
fn empty_run_is_a_config_echo() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let (code, err) = agmon(&["--out", out.to_str().unwrap(), "--seed", "11", "all", "--only", ""]);
    assert_eq!(code, 0, "{err}");
    let r = report(&out);
    assert_eq!(r["sections"]["checks"], serde_json::json!([]));
    assert_eq!(r["config"]["seed"], 11);
    assert_valid(&r);
    assert_eq!(fs::read_to_string(out.join("all.csv")).unwrap(), "experiment,weight,quantity,x,value\n");
}

#[test]
fn repeated_all_runs_give_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let (code, err) = agmon(&["--out", out.to_str().unwrap(), "all", "--quick", "--only", "1,2,3,6,7,8,12"]);
        assert_eq!(code, 0, "{err}");
        assert_valid(&report(&out));
        fs::read(out.join("all.csv")).unwrap()
    };
    let (a, b) = (run("a"), run("b"));
    assert!(!a.is_empty());
    assert_eq!(a, b);
}

#[test]
fn exceeded_budget_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let (code, err) = agmon(&["--out", out.to_str().unwrap(), "all", "--only", "4", "--budget", "0.01"]);
    assert_eq!(code, 3, "{err}");
    let r = report(&out);
    assert_eq!(r["stages"][0]["over_budget"], true);
    assert_valid(&r);
}
