use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_solver-budget"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn metric_prints_six_digits() {
    let o = run(&["metric", "--p", "0.3", "--c", "0.1"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "3.566749\n");
}

#[test]
fn allocate_both_methods() {
    let o = run(&[
        "allocate",
        "--solver",
        "A:0.5:0.03",
        "--solver",
        "B:0.3:0.02",
        "--budget",
        "0.07",
    ]);
    assert!(o.status.success());
    let text = stdout(&o);
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(
        rows[0],
        "method,solver,count,total_cost,objective,success_prob"
    );
    assert!(rows[1].starts_with("lp_relaxation,A,2.333333"));
    assert!(rows[3].starts_with("knapsack,A,1,"));
    assert!(rows[4].starts_with("knapsack,B,2,"));
}

#[test]
fn allocate_json() {
    let o = run(&[
        "--format",
        "json",
        "allocate",
        "--solver",
        "A:0.5:0.03",
        "--budget",
        "0.07",
        "--method",
        "knapsack",
    ]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["counts"]["A"], 2.0);
    assert_eq!(v["success_prob"], 0.75);
}

#[test]
fn estimate_fixed_and_adaptive() {
    let o = run(&["estimate", "--successes", "5", "--trials", "10"]);
    let line = stdout(&o).lines().nth(1).unwrap().to_string();
    let f: Vec<&str> = line.split(',').collect();
    assert!((f[3].parse::<f64>().unwrap() - 0.187086).abs() < 1e-6);

    let o = run(&[
        "estimate",
        "--outcomes",
        "1,1,1,1,1,1,1,1,1,1,1,1",
        "--target-length",
        "0.31",
    ]);
    let line = stdout(&o).lines().nth(1).unwrap().to_string();
    assert!(line.starts_with("10,10,"));
    assert!(line.ends_with(",true"));
}

#[test]
fn fit_cost_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("costs.csv");
    let body: String = (1..=8)
        .map(|q| format!("{q},{}\n", 0.05 + 0.002 * (q as f64).powi(2)))
        .collect();
    std::fs::write(&path, format!("queries,cost_usd\n{body}")).unwrap();
    let o = run(&[
        "--format",
        "json",
        "fit-cost",
        "--input",
        path.to_str().unwrap(),
        "--base-cost",
        "0.1",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["gamma"].as_f64().unwrap() - 2.0).abs() < 1e-6);
    assert!((v["a_prime"].as_f64().unwrap() - 0.5).abs() < 1e-6);
}

#[test]
fn simulate_from_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("kshot.toml");
    std::fs::write(
        &path,
        "kind = \"kshot\"\np = 0.3\nc = 0.1\nbudgets = [0.1, 0.5]\ntrials = 2000\nseed = 1\n",
    )
    .unwrap();
    let o = run(&["simulate", "--config", path.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 3);
    assert!(text
        .lines()
        .nth(1)
        .unwrap()
        .starts_with("synthetic-kshot,cost,0.1,"));
}

#[test]
fn metric_table_from_log() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("log.csv");
    std::fs::write(
        &path,
        "problem_id,strategy,attempt_index,queries,cost_usd,verdict\np1,k,1,1,0.1,OK\np2,k,1,1,0.1,FAIL\n",
    )
    .unwrap();
    let o = run(&["metric", "--log", path.to_str().unwrap()]);
    assert!(o.status.success());
    let row = stdout(&o).lines().nth(1).unwrap().to_string();
    assert!(row.starts_with("k,2,1,0.5,"));
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["allocate", "--solver", "bad"]).status.code(), Some(1));
    assert_eq!(
        run(&["estimate", "--successes", "11", "--trials", "10"])
            .status
            .code(),
        Some(2)
    );
    let o = run(&[
        "curves",
        "--log",
        "/nonexistent/log.csv",
        "--thresholds",
        "1",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!o.stderr.is_empty());
}
