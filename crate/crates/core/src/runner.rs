//! Experiment runs: training from a [`RunConfig`] and writing result files.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::losses::LossContext;
use crate::optim::{train, train_inverse, TrainReport};
use crate::problems::{equidistant_grid, ProblemSpec};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    Solve,
    Inverse,
}

/// Contents of `results.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub config: RunConfig,
    pub mode: RunMode,
    pub eps1: f64,
    pub eps_inf: f64,
    pub eps_lambda: Option<f64>,
    pub lambda: Option<f64>,
    pub final_loss: Option<f64>,
    pub epochs_run: usize,
    /// Summed per-epoch training time in seconds.
    pub wall_time_s: f64,
    pub diverged: bool,
    pub divergence: Option<String>,
    pub loss_curve: PathBuf,
    pub solution_dump: PathBuf,
    pub lambda_curve: Option<PathBuf>,
    pub version: String,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub record: ResultRecord,
    pub report: TrainReport,
    pub output_dir: PathBuf,
}

/// `{:.16e}`: 17 significant digits, enough to round-trip an `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(text.as_bytes())?;
    Ok(())
}

/// For inverse runs `total` also holds the observation term, `total - r - s`.
fn loss_csv(report: &TrainReport) -> String {
    let mut s = String::from("epoch,total,r,s,wall_ms\n");
    for (i, (h, t)) in report.history.iter().zip(&report.epoch_seconds).enumerate() {
        s.push_str(&format!("{i},{},{},{},{}\n", fmt_f64(h.total), fmt_f64(h.r), fmt_f64(h.s), fmt_f64(t * 1e3)));
    }
    s
}

fn lambda_csv(report: &TrainReport, problem: &ProblemSpec) -> String {
    let gt = problem.lambda_gt().unwrap_or(f64::NAN);
    let mut s = String::from("epoch,lambda,eps_lambda\n");
    let trajectory = report.lambda_history.iter().copied().chain(report.lambda);
    for (i, l) in trajectory.enumerate() {
        s.push_str(&format!("{i},{},{}\n", fmt_f64(l), fmt_f64((l - gt).abs())));
    }
    s
}

fn solution_csv(ctx: &LossContext, report: &TrainReport, eval_n: usize) -> Result<String> {
    let problem = ctx.problem();
    let arch = ctx.arch();
    let dim = problem.dim();
    let pts = equidistant_grid(dim, eval_n);
    let values = arch.eval(&report.params[..arch.param_count()], pts.view())?;
    let mut s = (1..=dim).map(|i| format!("x{i}")).collect::<Vec<_>>().join(",");
    s.push_str(",u_hat,u_gt,abs_err\n");
    for (row, u) in pts.rows().into_iter().zip(values) {
        let gt = problem.solution(row.as_slice().expect("row-major")).unwrap_or(f64::NAN);
        for x in row {
            s.push_str(&fmt_f64(*x));
            s.push(',');
        }
        s.push_str(&format!("{},{},{}\n", fmt_f64(u), fmt_f64(gt), fmt_f64((u - gt).abs())));
    }
    Ok(s)
}

/// Trains according to `config` and writes `results.json`, `loss.csv`,
/// `solution.csv` and, for inverse runs, `lambda.csv` into `output_dir`.
///
/// Configuration problems are reported before anything is written. A
/// diverged run still writes its partial outputs and is flagged in the record.
pub fn run_to_dir(config: &RunConfig, mode: RunMode, output_dir: &Path) -> Result<RunOutcome> {
    config.validate()?;
    let problem = config.problem_spec()?;
    match (mode, problem.is_inverse()) {
        (RunMode::Solve, true) => {
            return Err(Error::Config(format!("{} is an inverse problem; use the inverse command", problem.name())))
        }
        (RunMode::Inverse, false) => {
            return Err(Error::Config(format!("{} has no unknown parameter", problem.name())))
        }
        _ => {}
    }
    let arch = config.architecture().map_err(|e| Error::Config(e.to_string()))?;
    let ctx = LossContext::new(problem.clone(), config.loss_spec(), arch).map_err(|e| Error::Config(e.to_string()))?;
    let tc = config.train_config();
    let report = match mode {
        RunMode::Solve => train(&ctx, &tc)?,
        RunMode::Inverse => train_inverse(&ctx, &tc, config.lambda0.unwrap_or(1.0))?,
    };

    fs::create_dir_all(output_dir)?;
    let loss_path = output_dir.join("loss.csv");
    write_file(&loss_path, &loss_csv(&report))?;
    let solution_path = output_dir.join("solution.csv");
    let finite = report.params.iter().all(|v| v.is_finite());
    if finite {
        write_file(&solution_path, &solution_csv(&ctx, &report, config.eval_n)?)?;
    }
    let lambda_path = (mode == RunMode::Inverse).then(|| output_dir.join("lambda.csv"));
    if let Some(p) = &lambda_path {
        write_file(p, &lambda_csv(&report, &problem))?;
    }
    let metrics = report.metrics();
    let timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let record = ResultRecord {
        config: config.clone(),
        mode,
        eps1: metrics.map_or(f64::NAN, |m| m.eps1),
        eps_inf: metrics.map_or(f64::NAN, |m| m.eps_inf),
        eps_lambda: metrics.and_then(|m| m.eps_lambda),
        lambda: report.lambda,
        final_loss: report.final_loss.map(|l| l.total),
        epochs_run: report.epochs_run(),
        wall_time_s: report.total_seconds(),
        diverged: report.diverged(),
        divergence: report.divergence.clone(),
        loss_curve: loss_path,
        solution_dump: solution_path,
        lambda_curve: lambda_path,
        version: VERSION.to_string(),
        timestamp,
    };
    let json = serde_json::to_string_pretty(&record).map_err(|e| Error::Io(e.to_string()))?;
    write_file(&output_dir.join("results.json"), &(json + "\n"))?;
    Ok(RunOutcome { record, report, output_dir: output_dir.to_path_buf() })
}

/// Runs `config` into its resolved output directory.
pub fn run(config: &RunConfig, mode: RunMode) -> Result<RunOutcome> {
    run_to_dir(config, mode, &config.resolved_output_dir())
}

pub fn cmd_solve(config_path: &Path) -> Result<RunOutcome> {
    run(&RunConfig::load(config_path)?, RunMode::Solve)
}

pub fn cmd_inverse(config_path: &Path) -> Result<RunOutcome> {
    run(&RunConfig::load(config_path)?, RunMode::Inverse)
}

/// Result of one configuration in a sweep.
#[derive(Debug)]
pub struct SweepEntry {
    pub config_path: PathBuf,
    pub outcome: Result<RunOutcome>,
}

/// Runs every `*.toml` in `dir` in file-name order. Each run writes into
/// `<output_dir>/<file stem>`; the mode follows from the problem.
pub fn sweep(dir: &Path) -> Result<Vec<SweepEntry>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "toml"))
        .collect();
    paths.sort();
    Ok(paths
        .into_iter()
        .map(|path| {
            let outcome = RunConfig::load(&path).and_then(|cfg| {
                let stem = path.file_stem().expect("toml file has a stem");
                let out = cfg.resolved_output_dir().join(stem);
                let mode = if cfg.problem_spec()?.is_inverse() { RunMode::Inverse } else { RunMode::Solve };
                run_to_dir(&cfg, mode, &out)
            });
            SweepEntry { config_path: path, outcome }
        })
        .collect())
}

/// Process exit code for a run result: 0 ok, 2 configuration error,
/// 3 divergence, 1 anything else.
pub fn exit_code(outcome: &Result<RunOutcome>) -> i32 {
    match outcome {
        Ok(o) if o.record.diverged => 3,
        Ok(_) => 0,
        Err(Error::Config(_)) => 2,
        Err(Error::Divergence(_)) => 3,
        Err(_) => 1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(problem: &str) -> RunConfig {
        let mut c = RunConfig::new(problem);
        c.hidden = vec![6];
        c.n_r = 8;
        c.epochs = 3;
        c.eval_n = 5;
        c
    }

    #[test]
    fn solve_writes_all_files() {
        let dir = tempfile::tempdir().unwrap();
        let out = run_to_dir(&tiny("poisson1d"), RunMode::Solve, dir.path()).unwrap();
        assert_eq!(exit_code(&Ok(out.clone())), 0);
        for f in ["results.json", "loss.csv", "solution.csv"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        assert!(!dir.path().join("lambda.csv").exists());
        let loss = fs::read_to_string(dir.path().join("loss.csv")).unwrap();
        assert_eq!(loss.lines().next().unwrap(), "epoch,total,r,s,wall_ms");
        assert_eq!(loss.lines().count(), 4);
        let sol = fs::read_to_string(dir.path().join("solution.csv")).unwrap();
        assert_eq!(sol.lines().next().unwrap(), "x1,u_hat,u_gt,abs_err");
        assert_eq!(sol.lines().count(), 6);
        let rec: ResultRecord =
            serde_json::from_str(&fs::read_to_string(dir.path().join("results.json")).unwrap()).unwrap();
        assert_eq!(rec.config, tiny("poisson1d"));
        assert_eq!(rec.eps1, out.record.eps1);
    }

    #[test]
    fn inverse_writes_lambda_curve() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = tiny("poisson_inverse");
        c.lambda0 = Some(2.5);
        c.epochs = 0;
        let out = run_to_dir(&c, RunMode::Inverse, dir.path()).unwrap();
        assert_eq!(out.record.lambda, Some(2.5));
        let text = fs::read_to_string(dir.path().join("lambda.csv")).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "epoch,lambda,eps_lambda");
        let row: Vec<f64> = lines.next().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(row[1], 2.5);
    }

    #[test]
    fn mode_mismatch_is_a_config_error_without_files() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("o");
        let r = run_to_dir(&tiny("poisson_inverse"), RunMode::Solve, &out);
        assert_eq!(exit_code(&r), 2);
        let r = run_to_dir(&tiny("poisson1d"), RunMode::Inverse, &out);
        assert_eq!(exit_code(&r), 2);
        assert!(!out.exists());
    }

    #[test]
    fn float_format_round_trips() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23] {
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap(), v);
            let digits = s.split('e').next().unwrap().chars().filter(|c| c.is_ascii_digit()).count();
            assert_eq!(digits, 17);
        }
    }

    #[test]
    fn sweep_runs_sorted_configs() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("out");
        for (name, problem) in [("b", "poisson1d"), ("a", "poisson_inverse")] {
            let mut c = tiny(problem);
            c.output_dir = Some(out.clone());
            fs::write(dir.path().join(format!("{name}.toml")), c.to_toml_string()).unwrap();
        }
        fs::write(dir.path().join("c.toml"), "problem = 1").unwrap();
        fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
        let entries = sweep(dir.path()).unwrap();
        assert_eq!(entries.len(), 3);
        assert!(entries[0].config_path.ends_with("a.toml"));
        assert_eq!(entries[0].outcome.as_ref().unwrap().record.mode, RunMode::Inverse);
        assert!(out.join("a/lambda.csv").exists() && out.join("b/results.json").exists());
        assert_eq!(exit_code(&entries[2].outcome), 2);
    }
}
