use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn dimcurse(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dimcurse"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("DIMCURSE_ORACLE_CACHE")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn run_splits_budget_and_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let o = dimcurse(
        &[
            "run",
            "--objective",
            "cone_2",
            "--budget",
            "30",
            "--optimizer",
            "ps",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("budgets [5, 6]"));
    let csv = fs::read_to_string(dir.path().join("log.csv")).unwrap();
    assert_eq!(csv.lines().count(), 31);
    assert_eq!(csv.lines().next().unwrap(), "t,tau_1,tau_2,x_1,x_2,f");
    let log = json(&dir.path().join("log.json"));
    assert_eq!(log.as_array().unwrap().len(), 30);
    let report = json(&dir.path().join("report.json"));
    assert_eq!(report["horizon"], 30);
    assert!(report["noise_gap"].is_number());
    let names: Vec<&str> = report["bound_checks"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    assert_eq!(names, ["strong_bound", "weak_bound", "cumulative_bound"]);
}

#[test]
fn one_dimensional_run_is_bare_optimizer() {
    let dir = tempfile::tempdir().unwrap();
    let o = dimcurse(
        &["run", "--objective", "vee", "--budget", "7", "--dims", "1"],
        dir.path(),
    );
    assert!(o.status.success());
    assert!(stdout(&o).contains("budgets [7]"));
    let csv = fs::read_to_string(dir.path().join("log.csv")).unwrap();
    assert_eq!(csv.lines().count(), 8);
    assert!(json(&dir.path().join("report.json"))["noise_gap"].is_null());
}

#[test]
fn unknown_horizon_runs_epochs() {
    let dir = tempfile::tempdir().unwrap();
    let o = dimcurse(
        &[
            "run",
            "--objective",
            "cone_2",
            "--budget",
            "10",
            "--horizon",
            "unknown",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("epochs [1, 2, 4, 3]"));
    let mut total = 0;
    for k in 1..=4 {
        let csv = fs::read_to_string(dir.path().join(format!("epoch_{k}.csv"))).unwrap();
        total += csv.lines().count() - 1;
    }
    assert_eq!(total, 10);
    assert_eq!(json(&dir.path().join("report.json"))["horizon"], 10);
}

#[test]
fn runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = [
        "run",
        "--objective",
        "pyramid_3",
        "--budgets",
        "3,4,5",
        "--optimizer",
        "ps",
    ];
    assert!(dimcurse(&args, a.path()).status.success());
    assert!(dimcurse(&args, b.path()).status.success());
    for f in ["log.csv", "log.json", "report.json"] {
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let code = |args: &[&str]| dimcurse(args, dir.path()).status.code();
    assert_eq!(code(&["run", "--objective", "nope"]), Some(2));
    assert_eq!(
        code(&["run", "--objective", "cone_2", "--budget", "0"]),
        Some(2)
    );
    assert_eq!(
        code(&["run", "--objective", "cone_2", "--budgets", "5,3"]),
        Some(2)
    );
    assert_eq!(
        code(&["run", "--objective", "cone_2", "--dims", "3"]),
        Some(2)
    );
    assert_eq!(
        code(&["run", "--objective", "cone_2", "--noise-bounds", "-1,0"]),
        Some(2)
    );
    assert_eq!(code(&["run", "--optimizer", "bogus"]), Some(2));
    assert_eq!(
        code(&["sweep", "--objective", "vee", "--t-list", ""]),
        Some(2)
    );
}

#[test]
fn noise_bounds_accept_infinity() {
    let dir = tempfile::tempdir().unwrap();
    let o = dimcurse(
        &[
            "run",
            "--objective",
            "cone_2",
            "--budgets",
            "3,3",
            "--noise-bounds",
            "inf,0",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn audit_of_hand_trace() {
    let dir = tempfile::tempdir().unwrap();
    let o = dimcurse(
        &["audit", "--objective", "cone_2", "--budgets", "2,2"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let a = json(&dir.path().join("audit.json"));
    assert_eq!(a["decomposition"]["lhs"], 1.0);
    assert_eq!(a["decomposition"]["rhs"], 1.0);
    assert_eq!(a["decomposition"]["verdict"], "holds");
    assert_eq!(a["noise_gap"]["value"], 0.25);
    assert_eq!(a["trend"]["rows"].as_array().unwrap().len(), 4);
}

#[test]
fn audit_of_saved_log_matches_fresh_audit() {
    let dir = tempfile::tempdir().unwrap();
    let run_dir = dir.path().join("run");
    assert!(dimcurse(
        &["run", "--objective", "pyramid_2", "--budgets", "4,6"],
        &run_dir
    )
    .status
    .success());
    for file in ["log.csv", "log.json"] {
        let from_log = dir.path().join(format!("from_{file}"));
        let log = run_dir.join(file);
        let o = dimcurse(
            &[
                "audit",
                "--objective",
                "pyramid_2",
                "--log",
                log.to_str().unwrap(),
            ],
            &from_log,
        );
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let fresh = dir.path().join("fresh");
        assert!(dimcurse(
            &["audit", "--objective", "pyramid_2", "--budgets", "4,6"],
            &fresh
        )
        .status
        .success());
        assert_eq!(
            fs::read(from_log.join("audit.json")).unwrap(),
            fs::read(fresh.join("audit.json")).unwrap()
        );
    }
}

#[test]
fn audit_of_one_dimensional_run_omits_gap() {
    let dir = tempfile::tempdir().unwrap();
    assert!(dimcurse(
        &["audit", "--objective", "ripple", "--budget", "9"],
        dir.path()
    )
    .status
    .success());
    let a = json(&dir.path().join("audit.json"));
    assert!(a.get("noise_gap").is_none() && a.get("decomposition").is_none());
    assert_eq!(a["bounds"].as_array().unwrap().len(), 2);
}

#[test]
fn sweep_writes_ordered_rows() {
    let dir = tempfile::tempdir().unwrap();
    let o = dimcurse(
        &["sweep", "--objective", "pyramid_2", "--t-list", "16,4"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut rdr = csv::Reader::from_path(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(
        rdr.headers().unwrap().iter().collect::<Vec<_>>(),
        ["T", "r", "r_tilde", "R", "bound_strong", "bound_weak"]
    );
    let rows: Vec<Vec<f64>> = rdr
        .records()
        .map(|r| r.unwrap().iter().map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 2);
    assert_eq!((rows[0][0], rows[1][0]), (4.0, 16.0));
    for r in &rows {
        assert!(r[1] >= 0.0 && r[1] <= r[4] && r[4] <= r[5]);
    }
    assert!(dir.path().join("reports/report_T16.json").exists());
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    fs::write(
        &cfg,
        "objective = \"cone_3\"\nbudgets = [2, 2, 2]\noptimizer = \"uniform_grid\"\n",
    )
    .unwrap();
    let out = dir.path().join("o");
    let o = dimcurse(&["run", "--config", cfg.to_str().unwrap()], &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("budgets [2, 2, 2]"));
    let o = dimcurse(
        &["run", "--config", cfg.to_str().unwrap(), "--budget", "30"],
        &out,
    );
    assert!(stdout(&o).contains("budgets [3, 3, 4]"), "{}", stdout(&o));
    fs::write(&cfg, "objective = \"cone_3\"\nbudgetz = 3\n").unwrap();
    assert_eq!(
        dimcurse(&["run", "--config", cfg.to_str().unwrap()], &out)
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn oracle_cache_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache.json");
    let run = || {
        Command::new(env!("CARGO_BIN_EXE_dimcurse"))
            .args([
                "run",
                "--objective",
                "ripple",
                "--budget",
                "8",
                "--oracle-resolution",
                "4096",
                "--out",
            ])
            .arg(dir.path().join("o"))
            .env("DIMCURSE_ORACLE_CACHE", &cache)
            .output()
            .unwrap()
    };
    assert!(run().status.success());
    let c = json(&cache);
    assert!(c["entries"]["ripple@4096"]["value"].is_number());
    assert!(run().status.success());
    assert_eq!(json(&cache), c);
    assert_eq!(
        json(&dir.path().join("o/oracle.json")),
        c["entries"]["ripple@4096"]
    );
}

#[test]
fn list_objectives() {
    let o = Command::new(env!("CARGO_BIN_EXE_dimcurse"))
        .arg("--list-objectives")
        .output()
        .unwrap();
    assert!(o.status.success());
    let text = stdout(&o);
    for name in [
        "vee",
        "ripple",
        "pyramid_2",
        "pyramid_3",
        "cone_2",
        "cone_3",
    ] {
        assert!(text.contains(name));
    }
}
