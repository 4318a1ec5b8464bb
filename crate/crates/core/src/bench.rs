//! Timing of input derivatives: polynomial differentiation of grid samples
//! against per-point Taylor jets.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::diff::DiffOperator;
use crate::error::{Error, Result};
use crate::grid::TensorGrid;
use crate::jet::{nn_axis_derivatives, MAX_JET_ORDER};
use crate::nn::{Activation, MlpArchitecture};
use crate::runner::fmt_f64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub hidden: Vec<usize>,
    pub activation: Activation,
    /// Number of grid points (grid degree + 1).
    pub points: usize,
    pub order: usize,
    pub reps: usize,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self { hidden: vec![50, 50, 50, 50], activation: Activation::Sin, points: 200, order: 4, reps: 5, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub method: String,
    pub order: usize,
    pub points: usize,
    pub median_ms: f64,
    /// `median_ms` divided by the polynomial-differentiation median.
    pub ratio: f64,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn time_ms(reps: usize, mut f: impl FnMut() -> Result<f64>) -> Result<(f64, f64)> {
    let mut times = Vec::with_capacity(reps);
    let mut sink = 0.0;
    for _ in 0..reps {
        let start = Instant::now();
        sink += f()?;
        times.push(start.elapsed().as_secs_f64() * 1e3);
    }
    Ok((median(times), sink))
}

/// Median time of the `order`-th derivative of a 1D network at every grid
/// node, by both methods.
pub fn bench_derivatives(cfg: &BenchConfig) -> Result<Vec<BenchRow>> {
    if cfg.order > MAX_JET_ORDER {
        return Err(Error::OrderTooLarge { order: cfg.order, max: MAX_JET_ORDER });
    }
    if cfg.reps < 5 {
        return Err(Error::Config(format!("at least 5 repetitions are needed, got {}", cfg.reps)));
    }
    if cfg.points < 2 {
        return Err(Error::Config("at least 2 points are needed".into()));
    }
    let arch = MlpArchitecture::new(1, cfg.hidden.clone(), cfg.activation)?;
    let params = arch.init(cfg.seed);
    let grid = TensorGrid::new(1, cfg.points - 1)?;
    let diff = DiffOperator::new(&grid);
    let pts = grid.points();

    let (pd, _) = time_ms(cfg.reps, || {
        let u = arch.eval(params.as_slice(), pts.view())?;
        let d = if cfg.order == 0 { u } else { diff.apply_axis(&u, 0, cfg.order)? };
        Ok(d.iter().sum())
    })?;
    let (jet, _) = time_ms(cfg.reps, || {
        let mut acc = 0.0;
        for x in grid.coords(0) {
            acc += nn_axis_derivatives(&arch, params.as_slice(), &[*x], 0, cfg.order)?[cfg.order];
        }
        Ok(acc)
    })?;
    let row = |method: &str, ms: f64| BenchRow {
        method: method.into(),
        order: cfg.order,
        points: cfg.points,
        median_ms: ms,
        ratio: ms / pd,
    };
    Ok(vec![row("pd", pd), row("jet_ad", jet)])
}

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut s = String::from("method,order,points,median_ms,ratio\n");
    for r in rows {
        s.push_str(&format!("{},{},{},{},{}\n", r.method, r.order, r.points, fmt_f64(r.median_ms), fmt_f64(r.ratio)));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout_and_ratio() {
        let cfg = BenchConfig { hidden: vec![8], points: 20, order: 2, ..Default::default() };
        let rows = bench_derivatives(&cfg).unwrap();
        assert_eq!(rows[0].ratio, 1.0);
        assert!(rows.iter().all(|r| r.median_ms > 0.0));
        let csv = bench_csv(&rows);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "method,order,points,median_ms,ratio");
        assert!(lines[1].starts_with("pd,2,20,") && lines[2].starts_with("jet_ad,2,20,"));
    }

    #[test]
    fn rejects_bad_arguments() {
        let base = BenchConfig { hidden: vec![4], points: 10, ..Default::default() };
        assert!(bench_derivatives(&BenchConfig { order: 5, ..base.clone() }).is_err());
        assert!(bench_derivatives(&BenchConfig { reps: 3, ..base.clone() }).is_err());
        assert!(bench_derivatives(&BenchConfig { activation: Activation::Relu, ..base }).is_err());
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
