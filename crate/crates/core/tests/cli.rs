use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use scpinn::runner::ResultRecord;

fn scpinn(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scpinn"))
        .args(args)
        .current_dir(cwd)
        .env_remove("SCPINN_OUTPUT_ROOT")
        .output()
        .unwrap()
}

fn tiny(problem: &str, out: &str) -> String {
    format!("problem = \"{problem}\"\nhidden = [6]\nn_r = 8\nepochs = 4\neval_n = 5\noutput_dir = \"{out}\"\n")
}

#[test]
fn solve_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.toml"), tiny("poisson1d", "out")).unwrap();
    let o = scpinn(&["solve", "run.toml"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("eps1="));

    let out = dir.path().join("out");
    let rec: ResultRecord = serde_json::from_str(&fs::read_to_string(out.join("results.json")).unwrap()).unwrap();
    assert_eq!(rec.epochs_run, 4);
    assert!(!rec.diverged && rec.eps1.is_finite());
    assert_eq!(rec.config.problem, "poisson1d");
    let loss = fs::read_to_string(out.join("loss.csv")).unwrap();
    assert_eq!(loss.lines().count(), 5);
    let solution = fs::read_to_string(out.join("solution.csv")).unwrap();
    assert_eq!(solution.lines().next(), Some("x1,u_hat,u_gt,abs_err"));
    assert_eq!(solution.lines().count(), 6);

    // Same seed, same curve.
    let first = loss.lines().map(|l| l.rsplit_once(',').unwrap().0.to_string()).collect::<Vec<_>>();
    scpinn(&["solve", "run.toml"], dir.path());
    let again = fs::read_to_string(out.join("loss.csv")).unwrap();
    let second = again.lines().map(|l| l.rsplit_once(',').unwrap().0.to_string()).collect::<Vec<_>>();
    assert_eq!(first, second);
}

#[test]
fn inverse_writes_lambda_curve() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("inv.toml"), tiny("poisson_inverse", "inv") + "lambda0 = 2.0\n").unwrap();
    let o = scpinn(&["inverse", "inv.toml"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let lam = fs::read_to_string(dir.path().join("inv/lambda.csv")).unwrap();
    assert_eq!(lam.lines().count(), 6);
    assert!(lam.lines().nth(1).unwrap().starts_with("0,2.0000000000000000e0,"));
}

#[test]
fn malformed_configs_exit_2_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("unknown_key.toml", tiny("poisson1d", "a") + "bogus = 1\n", "solve"),
        ("bad_syntax.toml", "problem = \n".to_string(), "solve"),
        ("bad_problem.toml", tiny("nope", "b"), "solve"),
        ("wrong_mode.toml", tiny("poisson1d", "c"), "inverse"),
        ("negative_lr.toml", tiny("poisson1d", "d") + "lr = -1.0\n", "solve"),
    ];
    for (name, text, cmd) in &cases {
        fs::write(dir.path().join(name), text).unwrap();
        let o = scpinn(&[cmd, name], dir.path());
        assert_eq!(o.status.code(), Some(2), "{name}");
        assert!(!String::from_utf8_lossy(&o.stderr).is_empty());
    }
    let o = scpinn(&["solve", "missing.toml"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    for out in ["a", "b", "c", "d", "runs"] {
        assert!(!dir.path().join(out).exists(), "{out}");
    }
}

#[test]
fn sweep_runs_each_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfgs = dir.path().join("cfgs");
    fs::create_dir(&cfgs).unwrap();
    let root = dir.path().join("sweep");
    let root = root.to_str().unwrap();
    fs::write(cfgs.join("a.toml"), tiny("poisson1d", root)).unwrap();
    fs::write(cfgs.join("b.toml"), tiny("poisson_inverse", root)).unwrap();
    let o = scpinn(&["sweep", "cfgs"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("sweep/a/results.json").exists());
    assert!(dir.path().join("sweep/b/lambda.csv").exists());

    fs::write(cfgs.join("c.toml"), "nonsense").unwrap();
    assert_eq!(scpinn(&["sweep", "cfgs"], dir.path()).status.code(), Some(2));
}

#[test]
fn bench_prints_csv() {
    let dir = tempfile::tempdir().unwrap();
    let o = scpinn(
        &["bench", "--hidden", "8,8", "--points", "20", "--order", "3", "--output", "b.csv"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    let csv = fs::read_to_string(dir.path().join("b.csv")).unwrap();
    assert_eq!(String::from_utf8_lossy(&o.stdout), csv);
    assert!(csv.starts_with("method,order,points,median_ms,ratio\npd,3,20,"));
    assert_eq!(scpinn(&["bench", "--order", "5"], dir.path()).status.code(), Some(2));
    assert_eq!(scpinn(&["bench", "--activation", "relu", "--points", "10"], dir.path()).status.code(), Some(2));
    assert_eq!(scpinn(&["frobnicate"], dir.path()).status.code(), Some(2));
}
