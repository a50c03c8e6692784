mod common;

use isoas::cli::main_with_args;
use isoas::io::{parse_vertex_csv, read_sets_json};

fn run(args: &[&str]) -> i32 {
    let mut v = vec!["isoas"];
    v.extend_from_slice(args);
    main_with_args(v)
}

#[test]
fn isoas_moas_and_slice_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let prob = common::scenario_path("example1");
    let prob = prob.to_str().unwrap();
    assert_eq!(run(&["isoas", prob, "-o", out]), 0);
    assert_eq!(run(&["moas", prob, "-o", out]), 0);
    assert_eq!(run(&["slice", prob, "-o", out, "--r", "0,-1.5"]), 0);

    let sets: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("isoas.json")).unwrap())
            .unwrap();
    let (q, q_up, q_lo, moas) = read_sets_json(&sets).unwrap();
    assert_eq!([q.n_rows(), q_up.n_rows(), q_lo.n_rows()], [82, 36, 36]);
    assert!(moas.is_some());
    let trace = std::fs::read_to_string(dir.path().join("trace.jsonl")).unwrap();
    assert!(trace.lines().count() > 1);
    for line in trace.lines() {
        serde_json::from_str::<serde_json::Value>(line).unwrap();
    }
    assert!(dir.path().join("moas.json").exists());
    let csv = std::fs::read_to_string(dir.path().join("slice_1.csv")).unwrap();
    let polys = parse_vertex_csv(&csv).unwrap();
    assert_eq!(polys.len(), 4);
    assert!(!polys[0].is_empty());
    assert!(dir.path().join("slices.json").exists());
}

#[test]
fn verify_simulate_and_compare() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let prob = common::scenario_path("example2");
    let prob = prob.to_str().unwrap();
    assert_eq!(
        run(&[
            "verify",
            prob,
            "-o",
            out,
            "--samples",
            "300",
            "--horizon",
            "50",
            "--grid",
            "5"
        ]),
        0
    );
    let report: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("verify_report.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(report["passed"], true);
    assert_eq!(
        run(&["simulate", prob, "-o", out, "--x0", "1,-0.5", "--r", "0.5", "--steps", "20"]),
        0
    );
    let traj = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert_eq!(traj.lines().count(), 22);
    assert_eq!(
        run(&["compare", prob, "-o", out, "--r", "0", "--grid", "11", "--t-max", "200"]),
        0
    );
    assert!(dir.path().join("compare_0.csv").exists());
    assert!(dir.path().join("omega_0.csv").exists());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(run(&["bogus"]), 2);
    let prob = common::scenario_path("example1");
    let prob = prob.to_str().unwrap();
    // Ablation switches need the explicit opt-in.
    assert_eq!(
        run(&["isoas", prob, "-o", out, "--no-erosion-prevention"]),
        2
    );
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"A": [[1.0]]}"#).unwrap();
    assert_eq!(run(&["moas", bad.to_str().unwrap(), "-o", out]), 3);
    let unstable = dir.path().join("unstable.json");
    let mut v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(prob).unwrap()).unwrap();
    v.as_object_mut().unwrap().remove("lqr");
    v["K"] = serde_json::json!([[-1.0, -1.0]]);
    std::fs::write(&unstable, v.to_string()).unwrap();
    assert_eq!(run(&["isoas", unstable.to_str().unwrap(), "-o", out]), 4);
    assert_eq!(run(&["isoas", prob, "-o", out, "--i-max", "1"]), 5);
}
