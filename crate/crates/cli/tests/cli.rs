use std::io::Write;
use std::process::{Command, Output, Stdio};

fn kcm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kcm")).args(args).output().expect("run kcm")
}

fn kcm_stdin(args: &[&str], input: &str) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_kcm"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("spawn kcm");
    child.stdin.take().unwrap().write_all(input.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn sample_emits_one_permutation_line() {
    let o = kcm(&["sample", "4", "1", "--seed", "7", "--count", "1"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let mut cards: Vec<u32> = text.split_whitespace().map(|s| s.parse().unwrap()).collect();
    assert!(text.ends_with('\n'));
    cards.sort();
    assert_eq!(cards, vec![1, 2, 3, 4]);
}

#[test]
fn sample_single_card() {
    assert_eq!(stdout(&kcm(&["sample", "1", "5"])), "1\n");
}

#[test]
fn sample_is_deterministic() {
    let args = ["sample", "50", "3", "--seed", "11", "--count", "5", "--mode", "inverse"];
    let a = kcm(&args);
    let b = kcm(&args);
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(stdout(&a).lines().count(), 5);
}

#[test]
fn sample_json_and_strategies() {
    let o = kcm(&["sample", "6", "2", "--count", "3", "--format", "json", "--strategy", "copy"]);
    assert!(o.status.success());
    let v: Vec<Vec<u32>> = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v.len(), 3);
    assert!(v.iter().all(|p| p.len() == 6));
}

#[test]
fn sample_rejects_bad_flags() {
    assert_eq!(kcm(&["sample", "4", "0"]).status.code(), Some(2));
    assert_eq!(kcm(&["sample", "4", "2", "--mode", "fast"]).status.code(), Some(2));
    assert_eq!(kcm(&["sample", "4", "2", "--strategy", "best"]).status.code(), Some(2));
    assert_eq!(kcm(&["sample", "3", "1", "--strategy", "copy"]).status.code(), Some(2));
}

#[test]
fn stats_rows() {
    let o = kcm_stdin(&["stats", "--k", "1"], "1 2 3 4\n4 3 2 1\n2 1 4 3\n");
    assert!(o.status.success());
    assert_eq!(stdout(&o), "n,I,L,M\n4,0,4,3\n4,6,1,1\n4,2,2,2\n");
}

#[test]
fn stats_reads_file_and_json_lines() {
    let dir = std::env::temp_dir().join(format!("kcm-stats-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("perms.txt");
    std::fs::write(&path, "[3,1,2]\n\n1 2\n").unwrap();
    let o = kcm(&["stats", "--in", path.to_str().unwrap()]);
    assert_eq!(stdout(&o), "n,I,L,M\n3,2,2,1\n2,0,2,1\n");
}

#[test]
fn stats_names_bad_line() {
    let o = kcm_stdin(&["stats"], "1 2 3\n1 x 2\n");
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("line 2"), "{err}");
}

#[test]
fn pmf_and_moments_json() {
    let v: serde_json::Value = serde_json::from_slice(&kcm(&["pmf", "3", "1"]).stdout).unwrap();
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["offset"], 0);
    let probs: Vec<f64> = serde_json::from_value(v["probs"].clone()).unwrap();
    let expect = [1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0];
    assert!(probs.iter().zip(expect).all(|(a, b)| (a - b).abs() < 1e-12));

    let m: serde_json::Value = serde_json::from_slice(&kcm(&["moments", "10", "1"]).stdout).unwrap();
    assert!((m["mean"].as_f64().unwrap() - 22.5).abs() < 1e-9);
    assert_eq!(kcm(&["moments", "10", "1", "--t", "11"]).status.code(), Some(2));
}

#[test]
fn enumerate_joint_law() {
    let v: serde_json::Value = serde_json::from_slice(&kcm(&["enumerate", "3", "2"]).stdout).unwrap();
    assert_eq!(v["leaves"], 36);
    assert_eq!(v["joint"][0], serde_json::json!([0, 3, 5, 12]));
    assert_eq!(kcm(&["enumerate", "9", "3"]).status.code(), Some(2));
}

#[test]
fn experiment_output_is_identical_across_workers() {
    let dir = std::env::temp_dir().join(format!("kcm-exp-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("cfg.json");
    std::fs::write(
        &path,
        r#"{"n":[50,100],"k_rule":{"rule":"fixed","k":3},"trials":200,"seed":9,"statistics":["I","L","M"]}"#,
    )
    .unwrap();
    let p = path.to_str().unwrap();
    let outs: Vec<Vec<u8>> = ["1", "4", "16"]
        .iter()
        .map(|w| {
            let o = kcm(&["experiment", "--config", p, "--format", "csv", "--workers", w]);
            assert!(o.status.success());
            o.stdout
        })
        .collect();
    assert_eq!(outs[0], outs[1]);
    assert_eq!(outs[0], outs[2]);
    let csv = String::from_utf8(outs[0].clone()).unwrap();
    assert!(csv.starts_with("n,k,statistic,trials,mean,var,se,ks,verdict\n"));
    assert_eq!(csv.lines().count(), 7);

    let json: serde_json::Value = serde_json::from_slice(&kcm(&["experiment", "--config", p]).stdout).unwrap();
    assert_eq!(json["schema_version"], 1);
}

#[test]
fn experiment_rejects_infeasible_k() {
    let dir = std::env::temp_dir().join(format!("kcm-bad-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("cfg.json");
    std::fs::write(&path, r#"{"n":[5],"k_rule":{"rule":"fixed","k":9},"trials":2}"#).unwrap();
    assert_eq!(kcm(&["experiment", "--config", path.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn verify_oracle_passes() {
    let o = kcm(&["verify", "--suite", "oracle"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["passed"], true);
    assert_eq!(v["suite"], "oracle");
}

#[test]
fn verify_dominance_has_no_violations() {
    let o = kcm(&["verify", "--suite", "dominance"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    for check in v["checks"].as_array().unwrap() {
        assert_eq!(check["passed"], true, "{check}");
    }
}

#[test]
fn verify_failure_exits_one_and_names_check() {
    let dir = std::env::temp_dir().join(format!("kcm-verify-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("strict.json");
    // an impossible KS threshold forces a failure
    std::fs::write(&path, r#"{"ks_threshold": 0.0, "clt_trials": 1000}"#).unwrap();
    let o = kcm(&["verify", "--suite", "clt", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("clt_fixed_n2000_k4"), "{err}");
}

#[test]
fn unknown_suite_is_usage_error() {
    assert_eq!(kcm(&["verify", "--suite", "everything"]).status.code(), Some(2));
    assert_eq!(kcm(&["frobnicate"]).status.code(), Some(2));
}
