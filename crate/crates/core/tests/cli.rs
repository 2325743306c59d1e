use std::path::Path;
use std::process::{Command, Output};

fn run(dir: &Path, args: &[&str], config: &str) -> Output {
    let path = dir.join("config.json");
    std::fs::write(&path, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_enc-relay"))
        .args(args)
        .arg("--config")
        .arg(&path)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn analyze_to_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        &["analyze"],
        r#"{"command": "analyze", "params": {"policy": {"kind": "conventional", "capacity": 2}}}"#,
    );
    assert!(o.status.success());
    assert_eq!(
        stdout(&o),
        "K,lambda,epsilon,delay,loss,energy,normalized_energy\n2,1,1,0.6,0.2,0.8,0.8\n"
    );
}

#[test]
fn validation_errors_exit_2_with_json() {
    let dir = tempfile::tempdir().unwrap();
    for config in [
        r#"{"params": {"policy": {"kind": "fcfs", "capacity": 2}}, "colour": 1}"#,
        r#"{"params": {"policy": {"kind": "fcfs", "capacity": 0}}}"#,
        r#"{"params": {"policy": {"kind": "fcfs", "capacity": 2}, "lambda": -1}}"#,
        r#"{"command": "simulate", "params": {"policy": {"kind": "fcfs", "capacity": 2}}}"#,
        "not json",
    ] {
        let o = run(dir.path(), &["analyze"], config);
        assert_eq!(o.status.code(), Some(2), "{config}");
        let err = String::from_utf8(o.stderr).unwrap();
        let line: serde_json::Value = serde_json::from_str(err.trim()).unwrap();
        assert_eq!(line["error"], "validation");
        assert!(o.stdout.is_empty());
    }
    let o = Command::new(env!("CARGO_BIN_EXE_enc-relay"))
        .args(["analyze", "--config", "/nonexistent/config.json"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn strict_mode_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let config = r#"{"params": {"capacity": 3, "grid": [1.0, 1.05, 1.1]}}"#;
    assert_eq!(
        run(dir.path(), &["tradeoff"], config).status.code(),
        Some(0)
    );
    let o = run(dir.path(), &["tradeoff", "--strict"], config);
    assert_eq!(o.status.code(), Some(3));
    let mixed = r#"{"params": {"capacity": 3, "grid": [1.0, 1.5]}}"#;
    assert_eq!(
        run(dir.path(), &["tradeoff", "--strict"], mixed)
            .status
            .code(),
        Some(0)
    );
}

#[test]
fn unwritable_output_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let o = run(
        dir.path(),
        &[
            "analyze",
            "--out",
            blocker.join("out.csv").to_str().unwrap(),
        ],
        r#"{"params": {"policy": {"kind": "fcfs", "capacity": 2}}}"#,
    );
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = r#"{"seed": 1, "params": {"policy": {"kind": "conventional", "capacity": 2},
        "lambda": 1, "horizon": 5000}}"#;
    let a = stdout(&run(dir.path(), &["simulate"], config));
    let b = stdout(&run(dir.path(), &["simulate", "--seed", "1"], config));
    let c = stdout(&run(dir.path(), &["simulate", "--seed", "2"], config));
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert!(a.starts_with("replication,seed,arrivals,coded_tx,uncoded_tx,drops,final_queue,"));
}

#[test]
fn output_path_and_out_flag() {
    let dir = tempfile::tempdir().unwrap();
    let config = r#"{"output_path": "nested/curve.csv", "csv_precision": 4,
        "params": {"capacity": 3, "grid": {"start": 1.1, "stop": 2.1, "step": 0.01}}}"#;
    let o = run(dir.path(), &["tradeoff"], config);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    let csv = std::fs::read_to_string(dir.path().join("nested/curve.csv")).unwrap();
    assert_eq!(csv.lines().count(), 102);
    assert!(csv.contains("\n1.2,0.6,1,1,"));
    assert!(csv.contains("\n1.1,,,0,,\n"));

    let o = run(dir.path(), &["tradeoff", "--out", "other.csv"], config);
    assert!(o.status.success());
    assert_eq!(
        std::fs::read_to_string(dir.path().join("other.csv")).unwrap(),
        csv
    );
}

#[test]
fn overflow_command() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        &["overflow"],
        r#"{"params": {"q_total": 10000, "capacity": [0, 200], "trials": 2000}}"#,
    );
    assert!(o.status.success());
    let out = stdout(&o);
    let mut lines = out.lines();
    assert_eq!(
        lines.next(),
        Some("q_total,K,trials,empirical,std_error,theory")
    );
    assert!(lines.next().unwrap().ends_with(",1"));
    assert!(lines.next().unwrap().ends_with(",0.045500264"));
}

#[test]
fn reproduce_fig_writes_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let figs = dir.path().join("figs");
    for (config, files) in [
        (
            r#"{"params": {"figure": 4, "horizon": 300}}"#,
            ["fig4_conventional.csv", "fig4_enc.csv"],
        ),
        (
            r#"{"params": {"figure": 5, "horizon": 3000, "replications": 2}}"#,
            ["fig5_theory.csv", "fig5_sim.csv"],
        ),
        (
            r#"{"params": {"figure": 6, "max_capacity": 4, "horizon": 3000}}"#,
            ["fig6_theory.csv", "fig6_sim.csv"],
        ),
        (
            r#"{"params": {"figure": 7, "horizon": 3000, "replications": 2}}"#,
            ["fig7_theory.csv", "fig7_sim.csv"],
        ),
    ] {
        let o = run(
            dir.path(),
            &["reproduce-fig", "--out", figs.to_str().unwrap()],
            config,
        );
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        for f in files {
            assert!(figs.join(f).exists(), "{f}");
        }
    }
    let fig5 = std::fs::read_to_string(figs.join("fig5_theory.csv")).unwrap();
    assert!(fig5.starts_with("xi,g_K\n0,1\n"));
    assert!(fig5.ends_with("\n0.142857143,0\n"));
    let fig7 = std::fs::read_to_string(figs.join("fig7_sim.csv")).unwrap();
    assert_eq!(fig7.lines().count(), 4);
}
