//! Classical-limit experiments: how quantum quantities approach their
//! `t -> 0` counterparts along a grid of deformation parameters.
//!
//! Grid points are independent, so each experiment evaluates them in
//! parallel and collects results in grid order.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::element::LambdaElement;
use crate::error::{Error, Result};
use crate::operators::{inverse_residual_streamed, kernel_cap, qt_distance_sq, tilde_element};
use crate::operators::{
    operator_norm_estimate, schur_young_bound, Kernel, KernelOperatorSpec, Precision, QtKernelMode,
};
use crate::weights::DomainKind;
use crate::weights::{check_t, WeightFamily};
use crate::window::{truncation_window, IndexWindow};

/// One grid point of a convergence study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRecord {
    pub t: f64,
    pub k_lo: i64,
    pub k_hi: i64,
    pub primary_value: f64,
    pub reference_value: f64,
    pub abs_error: f64,
    pub tail_bound: f64,
}

/// Records in grid order (descending `t`).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceSeries {
    pub records: Vec<ConvergenceRecord>,
}

impl ConvergenceSeries {
    pub fn abs_errors(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.abs_error).collect()
    }

    /// Strictly decreasing errors after skipping `burn_in` leading points.
    pub fn strictly_decreasing(&self, burn_in: usize) -> bool {
        let e = self.abs_errors();
        e.iter().skip(burn_in).zip(e.iter().skip(burn_in + 1)).all(|(a, b)| b < a)
    }

    /// Last error over first error.
    pub fn reduction(&self) -> Option<f64> {
        let first = self.records.first()?;
        let last = self.records.last()?;
        Some(last.abs_error / first.abs_error)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square misfit in log-log coordinates.
    pub residual: f64,
    pub points_used: usize,
}

/// Checks a grid is nonempty, inside `(0, 1)` and strictly decreasing.
pub fn check_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.is_empty() {
        return Err(Error::Argument("empty t grid".into()));
    }
    for &t in t_grid {
        check_t(t)?;
        if t >= 1.0 {
            return Err(Error::Domain(t));
        }
    }
    if t_grid.windows(2).any(|p| p[1] >= p[0]) {
        return Err(Error::Argument("t grid must be strictly decreasing".into()));
    }
    Ok(())
}

/// `head * ratio^j` for `j = 0..points`.
pub fn geometric_grid(head: f64, ratio: f64, points: usize) -> Vec<f64> {
    (0..points).map(|j| head * ratio.powi(j as i32)).collect()
}

fn record(t: f64, w: &IndexWindow, primary: f64, reference: f64) -> ConvergenceRecord {
    ConvergenceRecord {
        t,
        k_lo: w.k_lo,
        k_hi: w.k_hi,
        primary_value: primary,
        reference_value: reference,
        abs_error: (primary - reference).abs(),
        tail_bound: w.tail_bound(),
    }
}

/// Runs `f` on every grid point in parallel, keeping grid order.
fn over_grid<T, F>(t_grid: &[f64], f: F) -> Vec<Result<T>>
where
    T: Send,
    F: Fn(f64) -> Result<T> + Sync,
{
    t_grid.par_iter().map(|&t| f(t)).collect()
}

/// The first error in grid order wins.
fn series(points: Vec<Result<ConvergenceRecord>>) -> Result<ConvergenceSeries> {
    Ok(ConvergenceSeries { records: points.into_iter().collect::<Result<_>>()? })
}

/// `||x_t||` against `||x_0||` along the grid.
pub fn norm_convergence(
    elem: &LambdaElement,
    family: &WeightFamily,
    t_grid: &[f64],
    tail_tol: f64,
    k_cap: u64,
) -> Result<ConvergenceSeries> {
    series(norm_points(elem, family, t_grid, tail_tol, k_cap)?)
}

/// [`norm_convergence`] with one outcome per grid point.
pub fn norm_points(
    elem: &LambdaElement,
    family: &WeightFamily,
    t_grid: &[f64],
    tail_tol: f64,
    k_cap: u64,
) -> Result<Vec<Result<ConvergenceRecord>>> {
    check_grid(t_grid)?;
    let classical = elem.classical_norm(family)?;
    Ok(over_grid(t_grid, |t| {
        let w = truncation_window(family, t, tail_tol, k_cap)?;
        Ok(record(t, &w, elem.quantum_norm(family, t, &w)?, classical))
    }))
}

/// `||Q_t x_t - y_t||` with `y = Q_0 x_0` built in the same kernel
/// convention as `Q_t`.
pub fn parametrix_convergence(
    elem: &LambdaElement,
    family: &WeightFamily,
    t_grid: &[f64],
    tail_tol: f64,
    k_cap: u64,
    mode: QtKernelMode,
) -> Result<ConvergenceSeries> {
    series(parametrix_points(elem, family, t_grid, tail_tol, k_cap, mode)?)
}

/// [`parametrix_convergence`] with one outcome per grid point.
pub fn parametrix_points(
    elem: &LambdaElement,
    family: &WeightFamily,
    t_grid: &[f64],
    tail_tol: f64,
    k_cap: u64,
    mode: QtKernelMode,
) -> Result<Vec<Result<ConvergenceRecord>>> {
    check_grid(t_grid)?;
    let y = tilde_element(elem, family, mode)?;
    Ok(over_grid(t_grid, |t| {
        let w = truncation_window(family, t, tail_tol, k_cap)?;
        let d = qt_distance_sq(elem, Some(&y), family, t, &w, mode)?;
        Ok(record(t, &w, d.max(0.0).sqrt(), 0.0))
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InverseRecord {
    pub t: f64,
    pub k_lo: i64,
    pub k_hi: i64,
    pub residual: f64,
    /// Base index of the largest deviation.
    pub at: i64,
    /// `10 tail_tol / w_t(k_lo + N)`, `N` the top band.
    pub bound: f64,
    pub precision: Precision,
}

impl InverseRecord {
    pub fn within_bound(&self) -> bool {
        self.residual <= self.bound
    }
}

/// `sup |D_t Q_t x - x|` on the window chosen by `tail_tol`.
pub fn inverse_residual(
    elem: &LambdaElement,
    family: &WeightFamily,
    t: f64,
    tail_tol: f64,
    k_cap: u64,
    mode: QtKernelMode,
) -> Result<InverseRecord> {
    let w = truncation_window(family, t, tail_tol, k_cap)?;
    let r = inverse_residual_streamed(elem, family, t, &w, mode)?;
    let edge = family.weight(t, w.k_lo + elem.top_band() as i64)?;
    Ok(InverseRecord {
        t,
        k_lo: w.k_lo,
        k_hi: w.k_hi,
        residual: r.sup,
        at: r.at,
        bound: 10.0 * w.tail_tol / edge,
        precision: r.precision,
    })
}

/// [`inverse_residual`] at every grid point.
pub fn inverse_points(
    elem: &LambdaElement,
    family: &WeightFamily,
    t_grid: &[f64],
    tail_tol: f64,
    k_cap: u64,
    mode: QtKernelMode,
) -> Result<Vec<Result<InverseRecord>>> {
    check_grid(t_grid)?;
    Ok(over_grid(t_grid, |t| inverse_residual(elem, family, t, tail_tol, k_cap, mode)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuityRow {
    pub t: f64,
    pub k_hi: i64,
    pub norm: f64,
    /// `||x_{t_next}|| - ||x_t||`; zero on the last row.
    pub forward_difference: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuityScan {
    pub rows: Vec<ContinuityRow>,
    /// `max |forward_difference|`.
    pub modulus: f64,
}

/// Samples `t -> ||x_t||` at `steps` evenly spaced points of `[t_lo, t_hi]`,
/// in ascending `t`.
pub fn continuity_scan(
    elem: &LambdaElement,
    family: &WeightFamily,
    t_interval: (f64, f64),
    steps: usize,
    tail_tol: f64,
    k_cap: u64,
) -> Result<ContinuityScan> {
    let (lo, hi) = t_interval;
    check_t(lo)?;
    check_t(hi)?;
    if !(lo < hi && hi < 1.0) {
        return Err(Error::Argument(format!("need 0 < t_lo < t_hi < 1, got [{lo}, {hi}]")));
    }
    if steps < 2 {
        return Err(Error::Argument("continuity scans need at least two steps".into()));
    }
    let grid: Vec<f64> = (0..steps).map(|j| lo + (hi - lo) * j as f64 / (steps - 1) as f64).collect();
    let norms = grid
        .par_iter()
        .map(|&t| {
            let w = truncation_window(family, t, tail_tol, k_cap)?;
            Ok((w.k_hi, elem.quantum_norm(family, t, &w)?))
        })
        .collect::<Vec<Result<_>>>()
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<ContinuityRow> = (0..steps)
        .map(|j| ContinuityRow {
            t: grid[j],
            k_hi: norms[j].0,
            norm: norms[j].1,
            forward_difference: if j + 1 < steps { norms[j + 1].1 - norms[j].1 } else { 0.0 },
        })
        .collect();
    let modulus = rows.iter().map(|r| r.forward_difference.abs()).fold(0.0, f64::max);
    Ok(ContinuityScan { rows, modulus })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformBoundRow {
    pub t: f64,
    pub k_hi: i64,
    /// `max ||Q_t x|| / ||x||` over the elements.
    pub max_ratio: f64,
    /// Index of the element attaining it.
    pub argmax: usize,
    pub schur_cap: f64,
    pub exceeds_cap: bool,
}

/// The cap that applies to `Q_t` on `elem`: output bands are orthogonal and
/// each comes from one kernel, so the largest kernel cap bounds the ratio.
pub fn element_cap(elem: &LambdaElement, family: &WeightFamily, mode: QtKernelMode) -> f64 {
    elem.bands().iter().map(|(b, _)| kernel_cap(Kernel::for_input(*b), mode, family)).fold(0.0, f64::max)
}

/// `max_x ||Q_t x|| / ||x||` per grid point, with the analytic cap.
pub fn uniform_bound_scan(
    elems: &[LambdaElement],
    family: &WeightFamily,
    t_grid: &[f64],
    tail_tol: f64,
    k_cap: u64,
    mode: QtKernelMode,
) -> Result<Vec<UniformBoundRow>> {
    uniform_bound_points(elems, family, t_grid, tail_tol, k_cap, mode)?.into_iter().collect()
}

/// [`uniform_bound_scan`] with one outcome per grid point.
pub fn uniform_bound_points(
    elems: &[LambdaElement],
    family: &WeightFamily,
    t_grid: &[f64],
    tail_tol: f64,
    k_cap: u64,
    mode: QtKernelMode,
) -> Result<Vec<Result<UniformBoundRow>>> {
    if elems.is_empty() {
        return Err(Error::Argument("uniform bound scans need at least one element".into()));
    }
    check_grid(t_grid)?;
    let cap = elems.iter().map(|e| element_cap(e, family, mode)).fold(0.0, f64::max);
    Ok(over_grid(t_grid, |t| {
        let w = truncation_window(family, t, tail_tol, k_cap)?;
        let mut best = (0.0f64, 0usize);
        for (j, e) in elems.iter().enumerate() {
            let norm = e.quantum_norm(family, t, &w)?;
            if norm == 0.0 {
                continue;
            }
            let ratio = qt_distance_sq(e, None, family, t, &w, mode)?.sqrt() / norm;
            if ratio > best.0 {
                best = (ratio, j);
            }
        }
        Ok(UniformBoundRow {
            t,
            k_hi: w.k_hi,
            max_ratio: best.0,
            argmax: best.1,
            schur_cap: cap,
            exceeds_cap: best.0 > cap,
        })
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelBoundRow {
    pub t: f64,
    pub kernel: Kernel,
    pub k_lo: i64,
    pub k_hi: i64,
    pub row_sup: f64,
    pub col_sup: f64,
    pub schur_bound: f64,
    pub power_norm: f64,
    pub converged: bool,
    pub analytic_cap: f64,
}

impl KernelBoundRow {
    /// Power iteration below the Schur bound, and the Schur bound below the cap.
    pub fn dominated(&self) -> bool {
        self.power_norm <= self.schur_bound * (1.0 + 1e-9) && self.schur_bound <= self.analytic_cap * (1.0 + 1e-12)
    }
}

/// A window of `len` indices: `[0, len)` on the disk, centred on the annulus.
pub fn centred_window(family: &WeightFamily, t: f64, len: usize) -> Result<IndexWindow> {
    if len < 2 {
        return Err(Error::Argument("kernel windows need at least two indices".into()));
    }
    let len = len as i64;
    let k_lo = match family.domain() {
        DomainKind::Disk => 0,
        DomainKind::Annulus => -(len / 2),
    };
    IndexWindow::explicit(family, t, k_lo, k_lo + len - 1)
}

/// Schur bounds and power-iteration norms for each kernel at each `t`,
/// in `(t, kernel)` order.
pub fn kernel_bound_scan(
    kernels: &[Kernel],
    family: &WeightFamily,
    t_grid: &[f64],
    window_len: usize,
    mode: QtKernelMode,
    iterations: usize,
) -> Result<Vec<Result<KernelBoundRow>>> {
    check_grid(t_grid)?;
    let jobs: Vec<(f64, Kernel)> = t_grid.iter().flat_map(|&t| kernels.iter().map(move |&k| (t, k))).collect();
    Ok(jobs
        .par_iter()
        .map(|&(t, kernel)| {
            let window = centred_window(family, t, window_len)?;
            let spec = KernelOperatorSpec { kernel, t, family: *family, window };
            let schur = schur_young_bound(&spec, mode)?;
            let norm = operator_norm_estimate(&spec, mode, iterations)?;
            Ok(KernelBoundRow {
                t,
                kernel,
                k_lo: window.k_lo,
                k_hi: window.k_hi,
                row_sup: schur.row_sup,
                col_sup: schur.col_sup,
                schur_bound: schur.bound,
                power_norm: norm.value,
                converged: norm.converged,
                analytic_cap: schur.analytic_cap,
            })
        })
        .collect())
}

/// Least-squares line through `(log t, log abs_error)`.
///
/// The first `drop_head` records are burn-in; records with
/// `abs_error <= 10 tail_bound` are dominated by truncation and skipped.
pub fn rate_fit(series: &ConvergenceSeries, drop_head: usize) -> Result<RateFit> {
    let points: Vec<(f64, f64)> = series
        .records
        .iter()
        .skip(drop_head)
        .filter(|r| r.abs_error > 10.0 * r.tail_bound && r.abs_error.is_finite())
        .map(|r| (r.t.ln(), r.abs_error.ln()))
        .collect();
    if points.len() < 3 {
        return Err(Error::InsufficientData { usable: points.len() });
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Argument("rate fit needs distinct t values".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = points.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    Ok(RateFit { slope, intercept, residual: (sse / n).sqrt(), points_used: points.len() })
}
