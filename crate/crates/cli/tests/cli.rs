use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

fn nsopt() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nsopt"))
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn code(cmd: &mut Command) -> i32 {
    cmd.output().expect("binary runs").status.code().expect("exit code")
}

#[test]
fn solve_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let status = code(nsopt()
        .args(["solve", "--seed", "7", "--trials", "1", "--config"])
        .arg(config("abs_ingd.json"))
        .arg("--out")
        .arg(&out));
    assert_eq!(status, 0);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("trial-0000/report.json")).unwrap())
            .unwrap();
    assert_eq!(report["success"], true);
    assert_eq!(report["report"]["seed"]["seed"], 7);
    assert!(out.join("trial-0000/cert.json").exists());
    assert!(out.join("summary.csv").exists());
}

#[test]
fn reruns_are_byte_identical_across_job_counts() {
    let dir = tempfile::tempdir().unwrap();
    let run = |jobs: &str, name: &str| {
        let out = dir.path().join(name);
        let status = code(nsopt()
            .args(["solve", "--jobs", jobs, "--config"])
            .arg(config("zigzag_ingd.json"))
            .arg("--out")
            .arg(&out));
        assert_eq!(status, 0);
        out
    };
    let a = run("1", "a");
    let b = run("4", "b");
    for f in ["summary.json", "summary.csv", "trial-0003/report.json", "trial-0014/cert.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn certify_accepts_and_rejects() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    assert_eq!(
        code(nsopt()
            .args(["solve", "--trials", "1", "--config"])
            .arg(config("abs_ingd.json"))
            .arg("--out")
            .arg(&out)),
        0
    );
    let cert = out.join("trial-0000/cert.json");
    let check = |path: &Path, eps: &str| {
        code(nsopt().args(["certify", "--epsilon", eps, "--cert"]).arg(path))
    };
    assert_eq!(check(&cert, "0.1"), 0);

    // moving the center away from the atoms breaks the radius condition
    let mut v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&cert).unwrap()).unwrap();
    v["center"] = serde_json::json!([50.0]);
    let bad = dir.path().join("bad.json");
    fs::write(&bad, v.to_string()).unwrap();
    assert_eq!(check(&bad, "0.1"), 2);

    assert_eq!(check(&dir.path().join("missing.json"), "0.1"), 1);
}

#[test]
fn adversary_and_agd() {
    assert_eq!(
        code(nsopt().args(["adversary", "--budget", "10", "--delta", "0.1", "--Delta", "16"])),
        0
    );
    assert_eq!(
        code(nsopt().args([
            "adversary", "--solver", "singd", "--budget", "20", "--delta", "0.1", "--Delta", "16"
        ])),
        0
    );
    // over the query budget: a contract error
    assert_eq!(
        code(nsopt().args(["adversary", "--budget", "21", "--delta", "0.1", "--Delta", "16"])),
        1
    );
    assert_eq!(code(nsopt().args(["agd", "--steps", "50"])), 0);
}

#[test]
fn usage_and_config_errors() {
    assert_eq!(code(nsopt().arg("bogus")), 1);
    assert_eq!(code(&mut nsopt()), 1);
    assert_eq!(code(nsopt().arg("--help")), 0);

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("cfg.json");
    fs::write(
        &bad,
        r#"{"objective": {"kind": "abs"}, "x0": [1.0, 2.0],
            "solver": {"kind": "ingd", "delta": 0.3, "epsilon": 0.1}}"#,
    )
    .unwrap();
    let out = nsopt().args(["solve", "--config"]).arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("`x0`"));
}

#[test]
fn scaling_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let status = code(nsopt()
        .args(["scaling", "--trials", "3", "--jobs", "2", "--epsilons", "0.2", "--deltas", "0.4,0.2", "--config"])
        .arg(config("zigzag_ingd.json"))
        .arg("--out")
        .arg(dir.path()));
    assert_eq!(status, 0);
    let csv = fs::read_to_string(dir.path().join("scaling.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.starts_with("epsilon,delta,median_calls,p90_calls,success_frac\n"));
}

#[test]
fn example_configs_parse() {
    for entry in fs::read_dir(config("")).unwrap() {
        let p = entry.unwrap().path();
        let name = p.file_name().unwrap().to_string_lossy().to_string();
        if name.contains("schema") || name.starts_with("agd") {
            continue;
        }
        nsopt_core::harness::ExperimentConfig::from_path(&p)
            .unwrap_or_else(|e| panic!("{name}: {e}"));
    }
    let agd = fs::read_to_string(config("agd_testbed.json")).unwrap();
    serde_json::from_str::<nsopt_core::harness::AgdExperiment>(&agd).unwrap();
}

#[test]
fn cli_main_reports_exit_codes() {
    assert_eq!(nsopt_cli::cli_main(["nsopt", "certify"]), 1);
    assert_eq!(nsopt_cli::cli_main(["nsopt", "agd", "--steps", "10"]), 0);
}
