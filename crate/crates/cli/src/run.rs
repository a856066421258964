//! Experiment dispatch, report files and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde_json::{json, Value};

use qdbar_core::limits::{
    centred_window, continuity_scan, inverse_points, kernel_bound_scan, norm_points, parametrix_points, rate_fit,
    uniform_bound_points, ConvergenceRecord, ConvergenceSeries,
};
use qdbar_core::operators::{Kernel, QtKernelMode};
use qdbar_core::weights::{condition_report, DomainKind};
use qdbar_core::window::truncation_window;

use crate::config::{Experiment, Format, RunConfig, Validated};
use crate::error::{CliError, ExitClass};
use crate::table::{Cell, Table};

/// Report columns per experiment.
pub fn columns(experiment: Experiment) -> &'static [&'static str] {
    match experiment {
        Experiment::CheckWeights => &["quantity", "t", "k", "value", "reference", "delta", "bound", "status"],
        Experiment::Norms => {
            &["t", "k_lo", "k_hi", "quantum_norm", "classical_norm", "abs_error", "tail_bound", "status"]
        }
        Experiment::Parametrix => &["mode", "t", "k_lo", "k_hi", "distance", "tail_bound", "status"],
        Experiment::Inverse => &["t", "k_lo", "k_hi", "mode", "residual", "at", "bound", "precision", "status"],
        Experiment::Schur => &[
            "t",
            "kernel",
            "n",
            "k_lo",
            "k_hi",
            "row_sup",
            "col_sup",
            "schur_bound",
            "power_norm",
            "converged",
            "analytic_cap",
            "status",
        ],
        Experiment::Continuity => &["t", "k_hi", "norm", "forward_difference"],
        Experiment::UniformBound => &["t", "k_hi", "max_ratio", "argmax", "schur_cap", "exceeds_cap", "status"],
    }
}

/// Files written by one run.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub report: PathBuf,
    pub manifest: PathBuf,
    pub exit: ExitClass,
    pub table: Table,
    pub summary: Value,
}

/// Status of one grid point, for the manifest.
struct Point {
    t: f64,
    status: String,
    /// Window used when it is not the truncation window of `t`.
    window: Option<(i64, i64)>,
}

struct Outcome {
    table: Table,
    exit: ExitClass,
    summary: Value,
    points: Vec<Point>,
    error: Option<String>,
}

impl Outcome {
    fn new(experiment: Experiment) -> Self {
        Self {
            table: Table::new(columns(experiment)),
            exit: ExitClass::Success,
            summary: Value::Null,
            points: Vec::new(),
            error: None,
        }
    }

    /// A failure before any grid point ran.
    fn failed(mut self, grid: &[f64], e: qdbar_core::Error) -> Self {
        let msg = e.to_string();
        self.points = grid.iter().map(|&t| Point { t, status: format!("error: {msg}"), window: None }).collect();
        self.exit = ExitClass::Numerical;
        self.error = Some(msg);
        self
    }

    fn point(&mut self, t: f64, status: &str) {
        match self.points.iter_mut().find(|p| p.t == t) {
            Some(p) if p.status == "ok" => p.status = status.to_owned(),
            Some(_) => {}
            None => self.points.push(Point { t, status: status.to_owned(), window: None }),
        }
    }
}

fn error_status(e: &qdbar_core::Error) -> String {
    format!("error: {e}")
}

/// Runs `experiment` as described by `config`, writing the report and the
/// manifest into `out_dir`.
pub fn run_experiment(
    config: &RunConfig,
    experiment: Experiment,
    out_dir: &Path,
    format: Format,
) -> Result<RunArtifacts, CliError> {
    if let Some(named) = config.experiment {
        if named != experiment {
            return Err(CliError::invalid(
                "cli",
                format!("config describes `{}` but `{}` was requested", named.name(), experiment.name()),
            ));
        }
    }
    let v = config.validate(Some(experiment))?;
    let started = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let clock = Instant::now();

    let outcome = match experiment {
        Experiment::CheckWeights => check_weights(config, &v),
        Experiment::Norms => norms(config, &v),
        Experiment::Parametrix => parametrix(config, &v),
        Experiment::Inverse => inverse(config, &v),
        Experiment::Schur => schur(config, &v),
        Experiment::Continuity => continuity(config, &v),
        Experiment::UniformBound => uniform_bound(config, &v),
    };
    let elapsed = clock.elapsed().as_secs_f64();

    fs::create_dir_all(out_dir)
        .map_err(|source| CliError::Io { context: format!("creating {}", out_dir.display()), source })?;
    let report = out_dir.join(format!("{}.{}", experiment.name(), format.extension()));
    let bytes = match format {
        Format::Csv => outcome.table.to_csv()?,
        Format::Json => {
            let mut b =
                serde_json::to_vec_pretty(&outcome.table.to_json()).map_err(|e| CliError::Encode(e.to_string()))?;
            b.push(b'\n');
            b
        }
    };
    fs::write(&report, bytes)
        .map_err(|source| CliError::Io { context: format!("writing {}", report.display()), source })?;

    let manifest_path = out_dir.join("manifest.json");
    let manifest = json!({
        "tool": "qdbar",
        "version": env!("CARGO_PKG_VERSION"),
        "library_version": qdbar_core::VERSION,
        "experiment": experiment.name(),
        "format": format.extension(),
        "report": report.file_name().map(|n| n.to_string_lossy().into_owned()),
        "started_unix": started,
        "wall_clock_seconds": elapsed,
        "exit_code": outcome.exit.code(),
        "status": outcome.exit.name(),
        "error": outcome.error,
        "config": config,
        "points": manifest_points(config, &v, &outcome.points),
        "summary": outcome.summary,
    });
    let mut text = serde_json::to_vec_pretty(&manifest).map_err(|e| CliError::Encode(e.to_string()))?;
    text.push(b'\n');
    fs::write(&manifest_path, text)
        .map_err(|source| CliError::Io { context: format!("writing {}", manifest_path.display()), source })?;

    Ok(RunArtifacts {
        report,
        manifest: manifest_path,
        exit: outcome.exit,
        table: outcome.table,
        summary: outcome.summary,
    })
}

/// Per-point windows: the truncation window of each `t`, recomputed here so
/// the manifest matches it exactly, unless the experiment used its own.
fn manifest_points(config: &RunConfig, v: &Validated, points: &[Point]) -> Vec<Value> {
    let tr = config.truncation;
    points
        .iter()
        .map(|p| {
            let window = match p.window {
                Some((lo, hi)) => Ok((lo, hi, None)),
                None => truncation_window(&v.family, p.t, tr.tail_tol, tr.k_cap)
                    .map(|w| (w.k_lo, w.k_hi, Some(w.tail_bound()))),
            };
            match window {
                Ok((lo, hi, tail)) => json!({
                    "t": p.t,
                    "k_lo": lo,
                    "k_hi": hi,
                    "window_len": hi - lo + 1,
                    "tail_bound": tail,
                    "status": p.status,
                }),
                Err(e) => json!({ "t": p.t, "window_error": e.to_string(), "status": p.status }),
            }
        })
        .collect()
}

fn series_summary(records: Vec<ConvergenceRecord>, drop_head: usize) -> Value {
    let s = ConvergenceSeries { records };
    let fit = match rate_fit(&s, drop_head) {
        Ok(f) => json!(f),
        Err(e) => json!({ "error": e.to_string() }),
    };
    json!({
        "points": s.records.len(),
        "strictly_decreasing": s.strictly_decreasing(0),
        "reduction": s.reduction(),
        "rate_fit": fit,
    })
}

fn check_weights(config: &RunConfig, v: &Validated) -> Outcome {
    let mut out = Outcome::new(Experiment::CheckWeights);
    let w = config.weights;
    let k_lo = w.k_lo.unwrap_or(match v.family.domain() {
        DomainKind::Disk => 0,
        DomainKind::Annulus => -w.k_hi,
    });
    let tail_index = w.tail_index.unwrap_or(w.k_hi / 2);
    let report = match condition_report(&v.family, &v.grid, (k_lo, w.k_hi), tail_index) {
        Ok(r) => r,
        Err(e) => return out.failed(&v.grid, e),
    };
    let tol = w.closed_form_tol;
    let mut mismatch = false;
    let mut compare =
        |out: &mut Outcome, q: &str, t: Option<f64>, k: Option<i64>, value: f64, reference: Option<f64>| {
            let delta = reference.map(|r| (value - r).abs());
            let ok = delta.is_none_or(|d| d <= tol);
            mismatch |= !ok;
            let status = if ok { "ok" } else { "mismatch" };
            out.table.push(vec![
                q.into(),
                t.into(),
                k.into(),
                value.into(),
                reference.into(),
                delta.into(),
                reference.map(|_| tol).into(),
                status.into(),
            ]);
            if let Some(t) = t {
                out.point(t, status);
            }
        };
    let window = Some((report.k_lo, report.k_hi));
    for (i, &t) in v.grid.iter().enumerate() {
        out.points.push(Point { t, status: "ok".into(), window });
        let r1 = report.reference_h1.as_ref().map(|r| r[i]);
        compare(&mut out, "h1", Some(t), None, report.h1_values[i], r1);
        let r2 = report.reference_h2.as_ref().map(|r| r[i]);
        compare(&mut out, "h2", Some(t), None, report.h2_values[i], r2);
    }
    for (j, &k) in report.h3_indices.iter().enumerate() {
        let r3 = report.reference_h3.as_ref().map(|r| r[j]);
        compare(&mut out, "h3", None, Some(k), report.h3_values[j], r3);
    }
    for (i, &t) in v.grid.iter().enumerate() {
        let ok = report.trace_within(i);
        let status = if ok { "ok" } else { "violated" };
        out.table.push(vec![
            "trace".into(),
            t.into(),
            Cell::Empty,
            report.trace_deviation[i].into(),
            Cell::Empty,
            Cell::Empty,
            report.trace_tail_bound[i].into(),
            status.into(),
        ]);
        out.point(t, status);
        out.table.push(vec![
            "limit_deviation".into(),
            t.into(),
            Cell::Int(tail_index),
            report.limit_deviation[i].into(),
            Cell::Empty,
            Cell::Empty,
            Cell::Empty,
            "ok".into(),
        ]);
    }
    let flag = |ok: bool| if ok { "ok" } else { "violated" };
    let empty = || vec![Cell::Empty; 5];
    let mut row = |q: &str, value: Cell, status: &str| {
        let mut r = vec![q.into(), Cell::Empty, Cell::Empty, value];
        r.extend(empty().into_iter().take(3));
        r.push(status.into());
        out.table.push(r);
    };
    row("monotonicity", Cell::Empty, flag(report.monotonicity_ok));
    row("positivity", Cell::Empty, flag(report.positivity_ok));
    row("const_wratio", report.const_wratio.into(), flag(report.const_wratio.is_finite()));

    out.exit = if !report.all_ok() {
        ExitClass::Condition
    } else if mismatch {
        ExitClass::Property
    } else {
        ExitClass::Success
    };
    out.summary = json!({
        "all_conditions_hold": report.all_ok(),
        "closed_form_tol": tol,
        "h1_delta": report.h1_delta(),
        "h2_delta": report.h2_delta(),
        "h3_delta": report.h3_delta(),
        "total_mass": report.total_mass,
        "const_wratio": report.const_wratio,
    });
    out
}

fn norms(config: &RunConfig, v: &Validated) -> Outcome {
    let mut out = Outcome::new(Experiment::Norms);
    let elem = v.element.as_ref().expect("validated");
    let tr = config.truncation;
    let points = match norm_points(elem, &v.family, &v.grid, tr.tail_tol, tr.k_cap) {
        Ok(p) => p,
        Err(e) => return out.failed(&v.grid, e),
    };
    let mut good = Vec::new();
    for (&t, p) in v.grid.iter().zip(points) {
        match p {
            Ok(r) => {
                out.table.push(vec![
                    t.into(),
                    r.k_lo.into(),
                    r.k_hi.into(),
                    r.primary_value.into(),
                    r.reference_value.into(),
                    r.abs_error.into(),
                    r.tail_bound.into(),
                    "ok".into(),
                ]);
                out.point(t, "ok");
                good.push(r);
            }
            Err(e) => {
                let mut row = vec![t.into()];
                row.extend(vec![Cell::Empty; 6]);
                row.push(error_status(&e).into());
                out.table.push(row);
                out.point(t, &error_status(&e));
                out.exit = out.exit.worst(ExitClass::Numerical);
            }
        }
    }
    out.summary = series_summary(good, config.drop_head);
    out
}

fn parametrix(config: &RunConfig, v: &Validated) -> Outcome {
    let mut out = Outcome::new(Experiment::Parametrix);
    let elem = v.element.as_ref().expect("validated");
    let tr = config.truncation;
    // Both matched conventions, the configured one first.
    let modes = match config.qt_kernel {
        QtKernelMode::Corrected => [QtKernelMode::Corrected, QtKernelMode::Printed],
        QtKernelMode::Printed => [QtKernelMode::Printed, QtKernelMode::Corrected],
    };
    let mut summary = serde_json::Map::new();
    for &t in &v.grid {
        out.points.push(Point { t, status: "ok".into(), window: None });
    }
    for mode in modes {
        let points = match parametrix_points(elem, &v.family, &v.grid, tr.tail_tol, tr.k_cap, mode) {
            Ok(p) => p,
            Err(e) => return out.failed(&v.grid, e),
        };
        let mut good = Vec::new();
        for (&t, p) in v.grid.iter().zip(points) {
            match p {
                Ok(r) => {
                    out.table.push(vec![
                        mode.name().into(),
                        t.into(),
                        r.k_lo.into(),
                        r.k_hi.into(),
                        r.abs_error.into(),
                        r.tail_bound.into(),
                        "ok".into(),
                    ]);
                    good.push(r);
                }
                Err(e) => {
                    let s = error_status(&e);
                    out.table.push(vec![
                        mode.name().into(),
                        t.into(),
                        Cell::Empty,
                        Cell::Empty,
                        Cell::Empty,
                        Cell::Empty,
                        s.as_str().into(),
                    ]);
                    out.point(t, &s);
                    out.exit = out.exit.worst(ExitClass::Numerical);
                }
            }
        }
        summary.insert(mode.name().into(), series_summary(good, config.drop_head));
    }
    out.summary = Value::Object(summary);
    out
}

fn inverse(config: &RunConfig, v: &Validated) -> Outcome {
    let mut out = Outcome::new(Experiment::Inverse);
    let elem = v.element.as_ref().expect("validated");
    let tr = config.truncation;
    let mode = config.qt_kernel;
    let points = match inverse_points(elem, &v.family, &v.grid, tr.tail_tol, tr.k_cap, mode) {
        Ok(p) => p,
        Err(e) => return out.failed(&v.grid, e),
    };
    let mut worst = 0.0f64;
    for (&t, p) in v.grid.iter().zip(points) {
        match p {
            Ok(r) => {
                worst = worst.max(r.residual);
                let (status, class) = match (r.within_bound(), config.expect_failure) {
                    (true, false) => ("ok", ExitClass::Success),
                    (false, true) => ("expected_failure", ExitClass::Success),
                    (false, false) => ("violation", ExitClass::Property),
                    (true, true) => ("unexpected_pass", ExitClass::Property),
                };
                out.exit = out.exit.worst(class);
                out.table.push(vec![
                    t.into(),
                    r.k_lo.into(),
                    r.k_hi.into(),
                    mode.name().into(),
                    r.residual.into(),
                    r.at.into(),
                    r.bound.into(),
                    precision_name(r.precision).into(),
                    status.into(),
                ]);
                out.point(t, status);
            }
            Err(e) => {
                let s = error_status(&e);
                let mut row = vec![t.into(), Cell::Empty, Cell::Empty, mode.name().into()];
                row.extend(vec![Cell::Empty; 4]);
                row.push(s.as_str().into());
                out.table.push(row);
                out.point(t, &s);
                out.exit = out.exit.worst(ExitClass::Numerical);
            }
        }
    }
    out.summary = json!({ "mode": mode.name(), "max_residual": worst, "expect_failure": config.expect_failure });
    out
}

fn precision_name(p: qdbar_core::operators::Precision) -> &'static str {
    match p {
        qdbar_core::operators::Precision::Double => "double",
        qdbar_core::operators::Precision::DoubleDouble => "double_double",
    }
}

fn kernel_name(k: Kernel) -> &'static str {
    match k {
        Kernel::T1(_) => "t1",
        Kernel::T2(_) => "t2",
    }
}

fn schur(config: &RunConfig, v: &Validated) -> Outcome {
    let mut out = Outcome::new(Experiment::Schur);
    let s = &config.schur;
    let kernels: Vec<Kernel> = match (&s.kernels, s.max_n, &v.element) {
        (Some(k), _, _) => k.clone(),
        (None, Some(n), _) => (0..=n).map(Kernel::T1).chain((1..=n).map(Kernel::T2)).collect(),
        (None, None, Some(e)) => qdbar_core::operators::qt::kernels_of(e).into_iter().map(|(k, _)| k).collect(),
        (None, None, None) => unreachable!("validated"),
    };
    let rows = match kernel_bound_scan(&kernels, &v.family, &v.grid, s.window, config.qt_kernel, s.iterations) {
        Ok(r) => r,
        Err(e) => return out.failed(&v.grid, e),
    };
    for &t in &v.grid {
        let window = centred_window(&v.family, t, s.window).ok().map(|w| (w.k_lo, w.k_hi));
        out.points.push(Point { t, status: "ok".into(), window });
    }
    let mut unconverged = 0usize;
    let jobs = v.grid.iter().flat_map(|&t| kernels.iter().map(move |&k| (t, k)));
    for ((t, kernel), row) in jobs.zip(rows) {
        match row {
            Ok(r) => {
                let status = if r.dominated() { "ok" } else { "violation" };
                if !r.dominated() {
                    out.exit = out.exit.worst(ExitClass::Property);
                }
                unconverged += usize::from(!r.converged);
                out.table.push(vec![
                    t.into(),
                    kernel_name(kernel).into(),
                    kernel.n().into(),
                    r.k_lo.into(),
                    r.k_hi.into(),
                    r.row_sup.into(),
                    r.col_sup.into(),
                    r.schur_bound.into(),
                    r.power_norm.into(),
                    r.converged.into(),
                    r.analytic_cap.into(),
                    status.into(),
                ]);
                out.point(t, status);
            }
            Err(e) => {
                let st = error_status(&e);
                let mut cells = vec![t.into(), kernel_name(kernel).into(), kernel.n().into()];
                cells.extend(vec![Cell::Empty; 8]);
                cells.push(st.as_str().into());
                out.table.push(cells);
                out.point(t, &st);
                out.exit = out.exit.worst(ExitClass::Numerical);
            }
        }
    }
    out.summary = json!({
        "mode": config.qt_kernel.name(),
        "kernels": kernels.len(),
        "window": s.window,
        "unconverged": unconverged,
    });
    out
}

fn continuity(config: &RunConfig, v: &Validated) -> Outcome {
    let mut out = Outcome::new(Experiment::Continuity);
    let elem = v.element.as_ref().expect("validated");
    let c = config.continuity;
    let tr = config.truncation;
    let scan = match continuity_scan(elem, &v.family, (c.t_lo, c.t_hi), c.steps, tr.tail_tol, tr.k_cap) {
        Ok(s) => s,
        Err(e) => return out.failed(&[c.t_lo, c.t_hi], e),
    };
    for r in &scan.rows {
        out.table.push(vec![r.t.into(), r.k_hi.into(), r.norm.into(), r.forward_difference.into()]);
        out.points.push(Point { t: r.t, status: "ok".into(), window: None });
    }
    out.summary = json!({ "steps": c.steps, "t_lo": c.t_lo, "t_hi": c.t_hi, "modulus": scan.modulus });
    out
}

fn uniform_bound(config: &RunConfig, v: &Validated) -> Outcome {
    let mut out = Outcome::new(Experiment::UniformBound);
    let tr = config.truncation;
    let points = match uniform_bound_points(&v.elements, &v.family, &v.grid, tr.tail_tol, tr.k_cap, config.qt_kernel) {
        Ok(p) => p,
        Err(e) => return out.failed(&v.grid, e),
    };
    let mut ratios = Vec::new();
    for (&t, p) in v.grid.iter().zip(points) {
        match p {
            Ok(r) => {
                let status = if r.exceeds_cap { "violation" } else { "ok" };
                if r.exceeds_cap {
                    out.exit = out.exit.worst(ExitClass::Property);
                }
                ratios.push(r.max_ratio);
                out.table.push(vec![
                    t.into(),
                    r.k_hi.into(),
                    r.max_ratio.into(),
                    r.argmax.into(),
                    r.schur_cap.into(),
                    r.exceeds_cap.into(),
                    status.into(),
                ]);
                out.point(t, status);
            }
            Err(e) => {
                let s = error_status(&e);
                let mut row = vec![t.into()];
                row.extend(vec![Cell::Empty; 5]);
                row.push(s.as_str().into());
                out.table.push(row);
                out.point(t, &s);
                out.exit = out.exit.worst(ExitClass::Numerical);
            }
        }
    }
    let hi = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    out.summary = json!({
        "mode": config.qt_kernel.name(),
        "elements": v.elements.len(),
        "max_ratio": if ratios.is_empty() { None } else { Some(hi) },
        "relative_spread": if ratios.is_empty() { None } else { Some((hi - lo) / hi) },
    });
    out
}
