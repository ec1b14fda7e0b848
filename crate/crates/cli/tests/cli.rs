use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use fdcurve_cli::RunConfig;

const QUICK: &str = r#"
seed = 3

[map]
id = "thm2_curve"

[[task]]
kind = "distortion"
samples = 50

[[task]]
kind = "osc"
name = "osc_third"
field = "coordinate"
index = 3

[[task]]
kind = "construct-lusin"
depth = 2
segment_samples = 500
ring_samples = 20
distortion_samples = 200
graph_samples = 51

[[task]]
kind = "verify-inequalities"
n = [2]
a = [1.0]
b = [1.0]
kappa = [1.0]
samples = 500
"#;

fn run(config: &str, out: &Path, extra: &[&str]) -> Output {
    let cfg = out.join("run.toml");
    fs::create_dir_all(out).unwrap();
    fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_fdcurve"))
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .unwrap()
}

fn csvs(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    v.sort();
    v
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn same_seed_gives_identical_csvs() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let oa = run(QUICK, &a, &["--seed", "9"]);
    let ob = run(QUICK, &b, &["--seed", "9", "--jobs", "1"]);
    assert_eq!(oa.status.code(), Some(0), "{}", stderr(&oa));
    assert_eq!(ob.status.code(), Some(0), "{}", stderr(&ob));
    let (ca, cb) = (csvs(&a), csvs(&b));
    assert_eq!(ca.len(), 5);
    assert_eq!(ca, cb);
    let c = tmp.path().join("c");
    run(QUICK, &c, &["--seed", "10"]);
    assert_ne!(csvs(&c).iter().find(|f| f.0 == "distortion.csv"), ca.iter().find(|f| f.0 == "distortion.csv"));
}

#[test]
fn report_echoes_the_config() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(QUICK, tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_slice(&fs::read(tmp.path().join("report.json")).unwrap()).unwrap();
    let echoed: RunConfig = serde_json::from_value(report["config"].clone()).unwrap();
    assert_eq!(echoed, RunConfig::parse(QUICK).unwrap());
    assert_eq!(report["seed"], 3);
    let tasks = report["tasks"].as_array().unwrap();
    assert_eq!(tasks.len(), 4);
    assert!(tasks.iter().all(|t| t["status"] == "ok"));
    assert_eq!(tasks[1]["headline"]["violated"], true);
}

#[test]
fn reals_use_seventeen_significant_digits() {
    let tmp = tempfile::tempdir().unwrap();
    run(QUICK, tmp.path(), &[]);
    let text = fs::read_to_string(tmp.path().join("distortion.csv")).unwrap();
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    let mantissa = row[0].split('e').next().unwrap().trim_start_matches('-');
    assert_eq!(mantissa.len(), 18, "{}", row[0]);
    let x: f64 = row[0].parse().unwrap();
    assert_eq!(format!("{x:.16e}"), row[0]);
}

#[test]
fn empty_task_list() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run("", tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&fs::read(tmp.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["tasks"].as_array().unwrap().len(), 0);
}

#[test]
fn unknown_key_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run("[[task]]\nkind = \"modulus-tail\"\na = 3.0\nlowr = [10.0]\n", tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("lowr"), "{}", stderr(&o));
    let o = run("sed = 1\n", tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`sed`"), "{}", stderr(&o));
}

#[test]
fn out_of_range_parameters_name_the_key() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run("[[task]]\nkind = \"construct-lusin\"\nlambda = 2.5\n", tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("task.construct-lusin.lambda"), "{}", stderr(&o));
    let o = run("[[task]]\nkind = \"modulus-tail\"\na = 2.0\n", tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("task.modulus-tail.a"), "{}", stderr(&o));
    let o = run("[map]\nid = \"lusin_G\"\nlambda = 2.0\n", tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("map.lambda"), "{}", stderr(&o));
    let o = run("[map]\nid = \"spiral\"\n", tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("map.id"), "{}", stderr(&o));
    let o = run("[[task]]\nkind = \"distortion\"\n", tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`map`"), "{}", stderr(&o));
}

#[test]
fn infeasible_construction_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = "[[task]]\nkind = \"construct-lusin\"\nepsilon = 1e-300\ndepth = 2\nsegment_samples = 10\n";
    let o = run(cfg, tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_slice(&fs::read(tmp.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["tasks"][0]["status"], "infeasible");
}

#[test]
fn lists_the_catalog() {
    let o = Command::new(env!("CARGO_BIN_EXE_fdcurve")).arg("--list-catalog").output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    let s = String::from_utf8(o.stdout).unwrap();
    for id in ["thm2_curve", "lusin_curve", "orlicz_bump_u", "rotating_pair", "construct-lusin"] {
        assert!(s.contains(id), "{id} missing");
    }
}

#[test]
fn missing_config_flag_is_a_usage_error() {
    let o = Command::new(env!("CARGO_BIN_EXE_fdcurve")).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}
