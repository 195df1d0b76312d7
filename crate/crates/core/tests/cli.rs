use std::path::Path;
use std::process::{Command, Output};

fn ecm_lab(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ecm-lab"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .env_remove("ECM_LAB_WORKERS")
        .output()
        .expect("spawn ecm-lab")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn help_lists_every_subcommand() {
    let out = Command::new(env!("CARGO_BIN_EXE_ecm-lab"))
        .arg("--help")
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for sub in [
        "paths",
        "compare",
        "sweep-window",
        "sweep-param",
        "error-scan",
        "sign-test",
    ] {
        assert!(text.contains(sub), "{sub} missing from help");
    }
    assert!(text.contains("Exit codes"));
}

#[test]
fn compare_writes_tables_and_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let out = ecm_lab(
            &[
                "compare",
                "--sims",
                "60",
                "--horizon",
                "80",
                "--seed",
                "3",
                "--workers",
                "2",
            ],
            dir,
        );
        assert!(out.status.success(), "{}", stderr(&out));
    }
    let table = std::fs::read_to_string(a.join("table_T80.csv")).unwrap();
    assert_eq!(table.lines().count(), 10);
    for name in [
        "table_T80.csv",
        "sweep.csv",
        "histogram_bins.csv",
        "histogram_markers.csv",
        "fees.csv",
        "result.json",
    ] {
        assert_eq!(
            std::fs::read(a.join(name)).unwrap(),
            std::fs::read(b.join(name)).unwrap(),
            "{name} differs"
        );
    }

    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "compare");
    assert_eq!(manifest["seed"], 3);
    assert_eq!(manifest["config"]["sims"], 60);
    assert_eq!(
        manifest["config"]["experiment"]["horizons"],
        serde_json::json!([80])
    );
    assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn config_errors_exit_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.json");

    std::fs::write(&cfg, r#"{"model": {"rho": 1.2}}"#).unwrap();
    let out = ecm_lab(&["paths", "--config", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(
        stderr(&out).contains("model.rho") && stderr(&out).contains("[0, 1)"),
        "{}",
        stderr(&out)
    );

    std::fs::write(&cfg, r#"{"experiment": {"windw": 10}}"#).unwrap();
    let out = ecm_lab(&["compare", "--config", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("experiment"), "{}", stderr(&out));

    let out = ecm_lab(&["compare", "--sims", "0"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unwritable_output_exits_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let blocker = tmp.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let out = ecm_lab(
        &["paths", "--sims", "2", "--horizon", "5"],
        &blocker.join("sub"),
    );
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
}

#[test]
fn paths_writes_kept_paths_and_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let out = ecm_lab(&["paths", "--sims", "5", "--horizon", "20"], tmp.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let paths = std::fs::read_to_string(tmp.path().join("paths.csv")).unwrap();
    assert_eq!(paths.lines().count(), 1 + 5 * 21);
    let summary = std::fs::read_to_string(tmp.path().join("path_summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 6);
}

#[test]
fn scans_respect_parameter_and_target_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("param");
    let out = ecm_lab(
        &[
            "sweep-param",
            "--param",
            "rho",
            "--sims",
            "10",
            "--horizon",
            "40",
        ],
        &dir,
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let sweep = std::fs::read_to_string(dir.join("sweep.csv")).unwrap();
    assert!(sweep
        .lines()
        .skip(1)
        .all(|l| l.split(',').nth(1) == Some("rho")));

    let dir = tmp.path().join("error");
    let out = ecm_lab(
        &[
            "error-scan",
            "--target",
            "r_d",
            "--sims",
            "5",
            "--horizon",
            "40",
        ],
        &dir,
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let sweep = std::fs::read_to_string(dir.join("sweep.csv")).unwrap();
    assert!(sweep
        .lines()
        .skip(1)
        .all(|l| l.split(',').nth(4) == Some("r_d")));

    let out = ecm_lab(&["sweep-param", "--param", "mu"], tmp.path());
    assert_eq!(out.status.code(), Some(2), "clap usage errors exit with 2");
}

#[test]
fn worker_count_comes_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_ecm-lab"))
        .args(["sign-test", "--sims", "4", "--horizon", "30", "--out"])
        .arg(tmp.path())
        .env("ECM_LAB_WORKERS", "3")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(tmp.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["workers"], 3);
}
