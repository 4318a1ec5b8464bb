//! C ABI over the `scpinn` core.
//!
//! Every function returns a [`ScpinnStatus`]; results are written through
//! out-pointers. Objects are opaque handles released with the matching
//! `*_free` function. After a non-`Ok` status the thread's last error
//! message is available from [`scpinn_last_error`].
//!
//! Arrays are passed as pointer plus length. Grid points are row-major,
//! one row of `dim` coordinates per node.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use scpinn::config::RunConfig;
use scpinn::diff::DiffOperator;
use scpinn::grid::TensorGrid;
use scpinn::runner::{self, ResultRecord, RunMode};
use scpinn::sobolev::{FormKind, SobolevForm};
use scpinn::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScpinnStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ConfigError = 3,
    Diverged = 4,
    Internal = 5,
}

/// Tensor Legendre grid with its differentiation operator.
pub struct ScpinnGrid {
    grid: TensorGrid,
    diff: DiffOperator,
}

/// Summary of a finished training run.
pub struct ScpinnReport {
    record: ResultRecord,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(status: ScpinnStatus, msg: impl Into<String>) -> ScpinnStatus {
    set_error(msg);
    status
}

fn from_error(e: Error) -> ScpinnStatus {
    let status = match e {
        Error::Config(_) | Error::UnknownProblem(_) => ScpinnStatus::ConfigError,
        Error::Divergence(_) => ScpinnStatus::Diverged,
        Error::Io(_) => ScpinnStatus::Internal,
        _ => ScpinnStatus::InvalidArgument,
    };
    fail(status, e.to_string())
}

/// Runs `f`, turning panics into `Internal`.
fn guard(f: impl FnOnce() -> Result<(), ScpinnStatus>) -> ScpinnStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ScpinnStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => fail(ScpinnStatus::Internal, "internal panic"),
    }
}

fn null() -> ScpinnStatus {
    fail(ScpinnStatus::NullPointer, "null pointer argument")
}

unsafe fn handle<'a, T>(p: *const T) -> Result<&'a T, ScpinnStatus> {
    p.as_ref().ok_or_else(null)
}

unsafe fn input<'a>(p: *const f64, len: usize) -> Result<&'a [f64], ScpinnStatus> {
    if p.is_null() {
        return Err(null());
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn output<'a>(p: *mut f64, len: usize) -> Result<&'a mut [f64], ScpinnStatus> {
    if p.is_null() {
        return Err(null());
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn write<T>(p: *mut T, v: T) -> Result<(), ScpinnStatus> {
    if p.is_null() {
        return Err(null());
    }
    p.write(v);
    Ok(())
}

fn copy_into(dst: &mut [f64], src: &[f64]) -> Result<(), ScpinnStatus> {
    if dst.len() != src.len() {
        return Err(fail(
            ScpinnStatus::InvalidArgument,
            format!("output length {} does not match {}", dst.len(), src.len()),
        ));
    }
    dst.copy_from_slice(src);
    Ok(())
}

/// Message of the last failure on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn scpinn_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn scpinn_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Creates the tensor grid of `(degree + 1)^dim` Legendre nodes.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for a handle.
#[no_mangle]
pub unsafe extern "C" fn scpinn_grid_new(dim: usize, degree: usize, out: *mut *mut ScpinnGrid) -> ScpinnStatus {
    guard(|| {
        if out.is_null() {
            return Err(null());
        }
        let grid = TensorGrid::new(dim, degree).map_err(from_error)?;
        let diff = DiffOperator::new(&grid);
        write(out, Box::into_raw(Box::new(ScpinnGrid { grid, diff })))
    })
}

/// Releases a grid. Null is ignored.
///
/// # Safety
/// `grid` must come from [`scpinn_grid_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn scpinn_grid_free(grid: *mut ScpinnGrid) {
    if !grid.is_null() {
        drop(Box::from_raw(grid));
    }
}

/// # Safety
/// `grid` must be a live handle and `dim`, `len` valid out-pointers.
#[no_mangle]
pub unsafe extern "C" fn scpinn_grid_shape(grid: *const ScpinnGrid, dim: *mut usize, len: *mut usize) -> ScpinnStatus {
    guard(|| {
        let g = handle(grid)?;
        write(dim, g.grid.dim())?;
        write(len, g.grid.len())
    })
}

/// Writes the `len * dim` node coordinates.
///
/// # Safety
/// `out` must hold `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn scpinn_grid_points(grid: *const ScpinnGrid, out: *mut f64, out_len: usize) -> ScpinnStatus {
    guard(|| {
        let g = handle(grid)?;
        let pts = g.grid.points();
        copy_into(output(out, out_len)?, pts.as_slice().expect("standard layout"))
    })
}

/// # Safety
/// `out` must hold `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn scpinn_grid_weights(grid: *const ScpinnGrid, out: *mut f64, out_len: usize) -> ScpinnStatus {
    guard(|| {
        let g = handle(grid)?;
        copy_into(output(out, out_len)?, g.grid.weights())
    })
}

/// Cubature of grid samples.
///
/// # Safety
/// `values` must hold `len` doubles and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn scpinn_grid_integrate(
    grid: *const ScpinnGrid,
    values: *const f64,
    len: usize,
    out: *mut f64,
) -> ScpinnStatus {
    guard(|| {
        let g = handle(grid)?;
        let v = g.grid.integrate(input(values, len)?).map_err(from_error)?;
        write(out, v)
    })
}

/// Lagrange interpolant of grid samples at the point `x` of length `dim`.
///
/// # Safety
/// `values` must hold `len` doubles, `x` hold `dim` doubles and `out` be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn scpinn_grid_interpolate(
    grid: *const ScpinnGrid,
    values: *const f64,
    len: usize,
    x: *const f64,
    dim: usize,
    out: *mut f64,
) -> ScpinnStatus {
    guard(|| {
        let g = handle(grid)?;
        let v = g.grid.lagrange_interpolate(input(values, len)?, input(x, dim)?).map_err(from_error)?;
        write(out, v)
    })
}

/// `order`-th derivative along `axis` of the interpolant, at the nodes.
///
/// # Safety
/// `values` and `out` must each hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn scpinn_grid_diff(
    grid: *const ScpinnGrid,
    values: *const f64,
    len: usize,
    axis: usize,
    order: usize,
    out: *mut f64,
) -> ScpinnStatus {
    guard(|| {
        let g = handle(grid)?;
        let d = g.diff.apply_axis(input(values, len)?, axis, order).map_err(from_error)?;
        copy_into(output(out, len)?, &d)
    })
}

/// Laplacian of the interpolant, at the nodes.
///
/// # Safety
/// `values` and `out` must each hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn scpinn_grid_laplacian(
    grid: *const ScpinnGrid,
    values: *const f64,
    len: usize,
    out: *mut f64,
) -> ScpinnStatus {
    guard(|| {
        let g = handle(grid)?;
        let v = input(values, len)?;
        let mut acc = vec![0.0; len];
        for axis in 0..g.grid.dim() {
            let d = g.diff.apply_axis(v, axis, 2).map_err(from_error)?;
            acc.iter_mut().zip(&d).for_each(|(a, b)| *a += b);
        }
        copy_into(output(out, len)?, &acc)
    })
}

/// Sobolev quadratic form of order `order`. `squared_weights` selects the
/// form weighted by squared cubature weights.
///
/// # Safety
/// `values` must hold `len` doubles and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn scpinn_grid_sobolev_quadratic(
    grid: *const ScpinnGrid,
    values: *const f64,
    len: usize,
    order: usize,
    squared_weights: bool,
    out: *mut f64,
) -> ScpinnStatus {
    guard(|| {
        let g = handle(grid)?;
        let kind = if squared_weights { FormKind::U } else { FormKind::W };
        let form = SobolevForm::new(&g.grid, order, kind);
        let v = form.quadratic(input(values, len)?).map_err(from_error)?;
        write(out, v)
    })
}

/// Trains the configuration given as TOML text and writes its outputs to
/// `output_dir` (or the configured directory when null). `inverse` selects
/// the inverse mode. A diverged run still yields a report alongside
/// `Diverged`.
///
/// # Safety
/// `config_toml` must be a NUL-terminated string, `output_dir` null or
/// NUL-terminated, and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn scpinn_run(
    config_toml: *const c_char,
    output_dir: *const c_char,
    inverse: bool,
    out: *mut *mut ScpinnReport,
) -> ScpinnStatus {
    guard(|| {
        if config_toml.is_null() || out.is_null() {
            return Err(null());
        }
        let text = CStr::from_ptr(config_toml)
            .to_str()
            .map_err(|_| fail(ScpinnStatus::InvalidArgument, "configuration is not UTF-8"))?;
        let cfg = RunConfig::from_toml_str(text).map_err(from_error)?;
        let dir = if output_dir.is_null() {
            cfg.resolved_output_dir()
        } else {
            let d = CStr::from_ptr(output_dir)
                .to_str()
                .map_err(|_| fail(ScpinnStatus::InvalidArgument, "output directory is not UTF-8"))?;
            PathBuf::from(d)
        };
        let mode = if inverse { RunMode::Inverse } else { RunMode::Solve };
        let outcome = runner::run_to_dir(&cfg, mode, &dir).map_err(from_error)?;
        let diverged = outcome.record.diverged;
        let msg = outcome.record.divergence.clone();
        write(out, Box::into_raw(Box::new(ScpinnReport { record: outcome.record })))?;
        if diverged {
            return Err(fail(ScpinnStatus::Diverged, msg.unwrap_or_else(|| "diverged".into())));
        }
        Ok(())
    })
}

/// Releases a report. Null is ignored.
///
/// # Safety
/// `report` must come from [`scpinn_run`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn scpinn_report_free(report: *mut ScpinnReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Relative L1 and maximum errors against the analytic solution.
///
/// # Safety
/// `report` must be live; `eps1` and `eps_inf` writable.
#[no_mangle]
pub unsafe extern "C" fn scpinn_report_errors(
    report: *const ScpinnReport,
    eps1: *mut f64,
    eps_inf: *mut f64,
) -> ScpinnStatus {
    guard(|| {
        let r = &handle(report)?.record;
        write(eps1, r.eps1)?;
        write(eps_inf, r.eps_inf)
    })
}

/// Recovered parameter and its relative error. `InvalidArgument` for
/// forward runs.
///
/// # Safety
/// `report` must be live; `lambda` and `eps_lambda` writable.
#[no_mangle]
pub unsafe extern "C" fn scpinn_report_lambda(
    report: *const ScpinnReport,
    lambda: *mut f64,
    eps_lambda: *mut f64,
) -> ScpinnStatus {
    guard(|| {
        let r = &handle(report)?.record;
        match (r.lambda, r.eps_lambda) {
            (Some(l), Some(e)) => {
                write(lambda, l)?;
                write(eps_lambda, e)
            }
            _ => Err(fail(ScpinnStatus::InvalidArgument, "not an inverse run")),
        }
    })
}

/// Final training loss (NaN when no epoch ran) and epoch count.
///
/// # Safety
/// `report` must be live; `loss` and `epochs` writable.
#[no_mangle]
pub unsafe extern "C" fn scpinn_report_training(
    report: *const ScpinnReport,
    loss: *mut f64,
    epochs: *mut usize,
) -> ScpinnStatus {
    guard(|| {
        let r = &handle(report)?.record;
        write(loss, r.final_loss.unwrap_or(f64::NAN))?;
        write(epochs, r.epochs_run)
    })
}
