use std::process::{Command, Output};

fn dualctl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dualctl"))
        .args(args)
        .env_remove("DUALCTL_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn certify_reference_parameters() {
    let out = dualctl(&["certify", "--samples", "2000"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("satisfied=true"));
    let margins: Vec<f64> = text
        .lines()
        .skip(1)
        .take(3)
        .map(|l| l.split(',').nth(2).unwrap().parse().unwrap())
        .collect();
    assert!(margins.iter().all(|m| *m > 0.0), "{margins:?}");
}

#[test]
fn certify_small_p_names_first_inequality() {
    let out = dualctl(&["certify", "--p", "1.0", "--samples", "200"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("violated=inequality 1"), "{}", stdout(&out));
}

#[test]
fn simulate_reference_run_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("traj.csv");
    let out = dualctl(&["simulate", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let summary = stdout(&out);
    let gain: f64 = summary
        .split_whitespace()
        .find_map(|kv| kv.strip_prefix("gain="))
        .unwrap()
        .parse()
        .unwrap();
    assert!(gain < 4.0, "{summary}");
    let csv = std::fs::read_to_string(&path).unwrap();
    assert!(csv.starts_with("t,x,y,u,w,r_plus,r_minus,vbar,cum_cost,cum_dist\n"));
    assert_eq!(csv.lines().count(), 202);
}

#[test]
fn simulate_output_is_byte_stable() {
    let args = ["simulate", "--disturbance", "random", "--bound", "2", "--seed", "4", "--horizon", "50"];
    let a = dualctl(&args);
    let b = dualctl(&args);
    assert_eq!(a.stdout, b.stdout);
    assert!(!a.stdout.is_empty());
}

#[test]
fn env_seed_applies_and_flag_wins() {
    let base = ["simulate", "--disturbance", "random", "--horizon", "20"];
    let run = |env: Option<&str>, extra: &[&str]| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_dualctl"));
        cmd.args(base).args(extra);
        match env {
            Some(s) => cmd.env("DUALCTL_SEED", s),
            None => cmd.env_remove("DUALCTL_SEED"),
        };
        cmd.output().unwrap().stdout
    };
    assert_eq!(run(Some("9"), &[]), run(None, &["--seed", "9"]));
    assert_eq!(run(Some("9"), &["--seed", "3"]), run(None, &["--seed", "3"]));
    assert_ne!(run(Some("9"), &[]), run(None, &["--seed", "3"]));
}

#[test]
fn zero_policy_violates_the_bound() {
    let out = dualctl(&["simulate", "--policy", "zero"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("bound=violated"));
}

#[test]
fn config_file_merges_with_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"certificate": {"p": 1.0}, "certify": {"samples": 100}}"#).unwrap();
    let out = dualctl(&["certify", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let out = dualctl(&["certify", "--config", cfg.to_str().unwrap(), "--p", "1.7"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn invalid_config_exits_two_naming_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"gama": 4}"#).unwrap();
    let out = dualctl(&["certify", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("gama"));

    let out = dualctl(&["simulate", "--gamma", "-2"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("`gamma`"));

    let out = dualctl(&["certify", "--q", "20"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("certificate"));
}

#[test]
fn gain_search_writes_sequence() {
    let out = dualctl(&["gain-search", "--horizon", "20", "--budget", "500", "--x0", "1"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(stdout(&out).lines().count(), 21);
    assert!(stderr(&out).contains("bound=holds"));
}

#[test]
fn oracle_check_passes() {
    let out = dualctl(&["oracle-check", "--cases", "100"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("failed=0"));
}

#[test]
fn vi_on_a_coarse_grid() {
    let args = ["vi", "--y-points", "11", "--delta-points", "21", "--u-points", "21", "--v-points", "21"];
    let out = dualctl(&args);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).starts_with("delta,y,W\n"));
    assert!(stderr(&out).contains("verdict=converged"));
}

#[test]
fn help_lists_flags() {
    let out = dualctl(&["simulate", "--help"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    for flag in ["--config", "--gamma", "--policy", "--disturbance", "--out", "--seed", "--horizon"] {
        assert!(text.contains(flag), "missing {flag}");
    }
}
