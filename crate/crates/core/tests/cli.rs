use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

use szego_lab::experiments::{ldt_deviation, localization, DeviationEvent, ExperimentPlan, LdtResult, LocalizationResult};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_szego-lab"));
    c.env_remove("SZEGO_LAB_SEED");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("szego-lab-cli-{}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn missing_subcommand_prints_usage() {
    let o = run(&[]);
    assert_eq!(o.status.code(), Some(2));
    let text = String::from_utf8_lossy(&o.stdout).to_string() + &String::from_utf8_lossy(&o.stderr);
    assert!(text.contains("Usage"), "{text}");
}

#[test]
fn parabolic_matrix_is_a_config_error() {
    let o = run(&["--A", "1,1,0,1", "lyapunov"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("'A'"));
    assert_eq!(run(&["--lambda", "1.5", "lyapunov"]).status.code(), Some(2));
    assert_eq!(run(&["--eta", "0.01", "lyapunov"]).status.code(), Some(2));
    assert_eq!(run(&["--format", "xml", "jspec"]).status.code(), Some(2));
}

#[test]
fn lyapunov_flags_parse_and_run() {
    let o = run(&["--lambda", "0.1", "--eta", "1.5708", "--N", "2000", "--base-points", "2", "lyapunov"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("lambda,eta,n,l_n,l_norm,prediction,residual,l_n_se"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[0], "0.1");
    assert_eq!(row[2], "2000");
    assert_eq!(row[5].parse::<f64>().unwrap(), 0.1f64 * 0.1 * 0.5 / 2.0);
}

#[test]
fn jspec_alpha1_table() {
    let o = run(&["--preset", "alpha1", "jspec"]);
    assert!(o.status.success());
    let out = stdout(&o);
    let rows: Vec<_> = out.lines().skip(1).collect();
    assert_eq!(rows.len(), 65);
    for line in rows {
        let (eta, j) = line.split_once(',').unwrap();
        let (eta, j): (f64, f64) = (eta.parse().unwrap(), j.parse().unwrap());
        assert!((j - (eta / 2.0).cos().powi(2)).abs() < 1e-12, "{line}");
    }
}

#[test]
fn selftest_exits_zero() {
    let o = run(&["selftest"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert_eq!(stdout(&o).lines().filter(|l| l.starts_with("PASS")).count(), 6);
    let o = run(&["--tol", "unitarity=1e-300", "selftest"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL unitarity"));
}

#[test]
fn empty_window_is_reported_not_fatal() {
    let o = run(&["--window-c", "0.75", "localize"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).lines().any(|l| l.contains("no eigenvalues in I₀")));
}

#[test]
fn config_file_precedence_and_unknown_keys() {
    let path = scratch("run.conf");
    fs::write(&path, "# ldt settings\nsamples = 40\nN = 20,40\nseed = 8\n").unwrap();
    let p = path.to_str().unwrap();
    let from_file = stdout(&run(&["--config", p, "ldt"]));
    let from_flags = stdout(&run(&["--samples", "40", "--N", "20,40", "--seed", "8", "ldt"]));
    assert_eq!(from_file, from_flags);
    let overridden = stdout(&run(&["--config", p, "--seed", "9", "ldt"]));
    assert_eq!(overridden, stdout(&run(&["--samples", "40", "--N", "20,40", "--seed", "9", "ldt"])));
    let json = scratch("run.json");
    fs::write(&json, r#"{"samples": 40, "N": [20, 40], "seed": 8}"#).unwrap();
    assert_eq!(stdout(&run(&["--config", json.to_str().unwrap(), "ldt"])), from_file);
    let bad = scratch("bad.conf");
    fs::write(&bad, "samples = 40\ncolour = blue\n").unwrap();
    let o = run(&["--config", bad.to_str().unwrap(), "ldt"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 2") && err.contains("colour"), "{err}");
}

#[test]
fn seed_environment_fallback() {
    let args = ["--samples", "30", "--N", "20,40", "ldt"];
    let env = bin().args(args).env("SZEGO_LAB_SEED", "31").output().unwrap();
    let flag = run(&["--samples", "30", "--N", "20,40", "--seed", "31", "ldt"]);
    assert_eq!(env.stdout, flag.stdout);
    let other = run(&["--samples", "30", "--N", "20,40", "--seed", "32", "ldt"]);
    assert_ne!(env.stdout, other.stdout);
    let both = bin().args(["--seed", "32"]).args(args).env("SZEGO_LAB_SEED", "31").output().unwrap();
    assert_eq!(both.stdout, other.stdout);
}

#[test]
fn json_summaries_round_trip() {
    let out = scratch("ldt.json");
    let o = run(&["--samples", "200", "--N", "20,40,80", "--seed", "5", "--format", "json", "--out", out.to_str().unwrap(), "ldt"]);
    assert!(o.status.success());
    let parsed: Vec<LdtResult> = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    let plan = ExperimentPlan {
        lambdas: vec![0.3],
        ns: vec![20, 40, 80],
        samples: 200,
        master_seed: 5,
        ..Default::default()
    };
    assert_eq!(parsed, vec![ldt_deviation(&plan, DeviationEvent::Lyapunov).unwrap()]);

    let o = run(&["--N", "60", "--lyapunov-len", "2000", "--seed", "3", "--format", "json", "localize"]);
    assert!(o.status.success());
    let parsed: LocalizationResult = serde_json::from_slice(&o.stdout).unwrap();
    let plan = ExperimentPlan {
        lambdas: vec![0.5],
        ns: vec![60],
        lyapunov_len: 2000,
        master_seed: 3,
        ..Default::default()
    };
    assert_eq!(parsed, localization(&plan).unwrap());
}

#[test]
fn green_profile_csv() {
    let o = run(&["--N", "120", "--eta", "1.6", "green"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert!(out.starts_with("n1,n2,log_abs_G\n"));
    assert!(out.lines().count() > 10);
}
