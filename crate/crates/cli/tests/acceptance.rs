//! Acceptance suite. All checks run in one test so their timings are not
//! disturbed by other tests sharing the CPU; each prints one line.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use qdbar_cli::{parse_config, run_experiment, ExitClass, Experiment, Format, RunArtifacts};
use qdbar_core::element::{BandEntry, LambdaElement};
use qdbar_core::limits::inverse_residual;
use qdbar_core::operators::{
    apply_d0, apply_qt, dt_residual_sup, inverse_residual_with, tilde_element, Precision, QtKernelMode, QtPath,
};
use qdbar_core::sum::NeumaierSum;
use qdbar_core::weights::{s_ratio_margin, DomainKind, FamilyKind, WeightFamily};
use qdbar_core::window::IndexWindow;

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/configs")
}

fn fixtures() -> Vec<LambdaElement> {
    let text = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures.json")).unwrap();
    let raw: Vec<Vec<BandEntry>> = serde_json::from_str(&text).unwrap();
    raw.iter().map(|e| LambdaElement::from_entries(e).unwrap()).collect()
}

fn disk() -> WeightFamily {
    WeightFamily::unilateral_example()
}

fn annulus() -> WeightFamily {
    WeightFamily::new(FamilyKind::BilateralRational { alpha: 1.0, beta: 0.5 }).unwrap()
}

fn arctan() -> WeightFamily {
    WeightFamily::new(FamilyKind::BilateralArctan { alpha: 2.0, beta: 0.5 }).unwrap()
}

/// Runs a config from the config directory, returning the artifacts and
/// the CSV bytes.
fn run_named(name: &str, out: &Path) -> (RunArtifacts, Vec<u8>) {
    let text = std::fs::read_to_string(configs_dir().join(name)).unwrap();
    let config = parse_config(&text).unwrap();
    let dir = out.join(name.trim_end_matches(".json"));
    let a = run_experiment(&config, config.experiment.unwrap(), &dir, Format::Csv).unwrap();
    let bytes = std::fs::read(&a.report).unwrap();
    (a, bytes)
}

struct Ledger {
    results: Vec<(u32, &'static str, bool)>,
    outputs: BTreeMap<String, Vec<u8>>,
    scratch: tempfile::TempDir,
}

impl Ledger {
    fn record(&mut self, id: u32, name: &'static str, pass: bool, detail: String) {
        // Written to the stdout handle directly so the line survives capture.
        let mut out = std::io::stdout().lock();
        let verdict = if pass { "PASS" } else { "FAIL" };
        writeln!(out, "acceptance [{id:02}] {name}: {verdict} ({detail})").unwrap();
        self.results.push((id, name, pass));
    }

    fn run(&mut self, name: &str) -> RunArtifacts {
        let (a, bytes) = run_named(name, self.scratch.path());
        self.outputs.insert(name.to_owned(), bytes);
        a
    }
}

fn closed_form_moduli(l: &mut Ledger) {
    let start = Instant::now();
    let a = l.run("check_weights.json");
    let secs = start.elapsed().as_secs_f64();
    let d = |k: &str| a.summary[k].as_f64().unwrap_or(f64::INFINITY);
    let worst = d("h1_delta").max(d("h2_delta")).max(d("h3_delta"));
    let pass = a.exit == ExitClass::Success && worst <= 1e-12 && secs < 1.0;
    l.record(1, "closed-form moduli h1/h2/h3", pass, format!("max delta {worst:.2e}, {secs:.2}s"));
}

fn commutation_identity(l: &mut Ledger) {
    let fam = disk();
    let mut worst = 0.0f64;
    for t in [0.5, 0.25, 0.1, 0.01] {
        for k in 0..=1000 {
            let s = fam.s_value(t, k).unwrap();
            let prev = if k == 0 { 0.0 } else { fam.weight_sq(t, k - 1).unwrap() };
            let rhs = t * (1.0 - prev) * (1.0 - fam.weight_sq(t, k).unwrap());
            worst = worst.max((s - rhs).abs());
        }
    }
    l.record(2, "commutation identity S_t = t(1-w^2)(1-w^2)", worst <= 1e-14, format!("max deviation {worst:.2e}"));
}

fn trace_identity(l: &mut Ledger) {
    let mut pass = true;
    let mut worst_slack = f64::INFINITY;
    for fam in [disk(), annulus(), arctan()] {
        for t in [0.5, 0.25, 0.1, 0.01] {
            let (lo, hi) = match fam.domain() {
                DomainKind::Disk => (0, 200_000),
                DomainKind::Annulus => (-200_000, 200_000),
            };
            let w = IndexWindow::explicit(&fam, t, lo, hi).unwrap();
            let mut sum = NeumaierSum::default();
            for k in lo..=hi {
                sum.add(fam.s_value(t, k).unwrap());
            }
            let dev = (sum.value() - fam.total_mass()).abs();
            // The deviation equals the tail exactly, so only rounding separates them.
            let bound = w.tail_bound_hi + w.tail_bound_lo + 16.0 * f64::EPSILON * fam.total_mass();
            pass &= dev <= bound;
            worst_slack = worst_slack.min(bound - dev);
        }
    }
    l.record(3, "trace identity within tail bound", pass, format!("min slack {worst_slack:.2e}"));
}

fn ratio_margin(l: &mut Ledger) {
    let start = Instant::now();
    let mut worst = f64::INFINITY;
    for fam in [disk(), annulus(), arctan()] {
        let window = match fam.domain() {
            DomainKind::Disk => (0, 99_999),
            DomainKind::Annulus => (-50_000, 49_999),
        };
        for t in [0.5, 0.1, 0.01] {
            for n in 1..=8 {
                worst = worst.min(s_ratio_margin(&fam, t, n, window).unwrap());
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = worst >= -1e-13 && secs < 5.0;
    l.record(4, "S ratio margin", pass, format!("min margin {worst:.2e}, {secs:.2}s"));
}

fn four_band_element() -> LambdaElement {
    let text = r#"[
        {"side":"f","n":4,"kind":"poly","coeffs":[0.3,-1.0,0.7]},
        {"side":"f","n":1,"kind":"sqrt_poly","coeffs":[1.0,0.25]},
        {"side":"diag","n":0,"kind":"poly","coeffs":[0.5,0.0,-0.4]},
        {"side":"g","n":2,"kind":"poly","coeffs":[-0.8,0.6]},
        {"side":"g","n":4,"kind":"sqrt_poly","coeffs":[0.9,-0.3,0.1]}
    ]"#;
    LambdaElement::from_entries(&serde_json::from_str::<Vec<BandEntry>>(text).unwrap()).unwrap()
}

fn fast_brute(l: &mut Ledger) {
    let start = Instant::now();
    let e = four_band_element();
    let mut worst = 0.0f64;
    for fam in [disk(), annulus()] {
        let lo = if fam.domain() == DomainKind::Disk { 0 } else { -2000 };
        let w = IndexWindow::explicit(&fam, 0.05, lo, lo + 3999).unwrap();
        for mode in [QtKernelMode::Corrected, QtKernelMode::Printed] {
            let fast = apply_qt(&e, &fam, 0.05, &w, mode, QtPath::Fast).unwrap();
            let brute = apply_qt(&e, &fam, 0.05, &w, mode, QtPath::Brute).unwrap();
            for (offset, b) in brute.bands() {
                let f = fast.band(offset).unwrap();
                let scale = b.iter().fold(0.0f64, |m, x| m.max(x.abs()));
                for (x, y) in f.iter().zip(b) {
                    worst = worst.max((x - y).abs() / scale);
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = worst <= 1e-12 && secs < 10.0;
    l.record(5, "fast/brute Q_t equivalence at K = 4000", pass, format!("max rel diff {worst:.2e}, {secs:.2}s"));
}

fn inverse_property(l: &mut Ledger) {
    let mut pass = true;
    let mut worst_ratio = 0.0f64;
    let mut precisions = std::collections::BTreeSet::new();
    for fam in [disk(), annulus()] {
        for (j, x) in fixtures().iter().enumerate() {
            for t in [0.5, 0.1] {
                let r = inverse_residual(x, &fam, t, 1e-6, 100_000_000, QtKernelMode::Corrected).unwrap();
                pass &= r.within_bound();
                worst_ratio = worst_ratio.max(r.residual / r.bound);
                precisions.insert(format!("{:?}", r.precision));
                if !r.within_bound() {
                    eprintln!("fixture {j} {:?} t={t}: {r:?}", fam.domain());
                }
            }
        }
    }
    // Oracle: materialized brute Q_t, then D_t entry by entry, at K = 500.
    let mut oracle_gap = 0.0f64;
    for fam in [disk(), annulus()] {
        let lo = if fam.domain() == DomainKind::Disk { 0 } else { -250 };
        let w = IndexWindow::explicit(&fam, 0.1, lo, lo + 499).unwrap();
        for x in fixtures() {
            let q = apply_qt(&x, &fam, 0.1, &w, QtKernelMode::Corrected, QtPath::Brute).unwrap();
            let direct = dt_residual_sup(&q, &x, &fam, 0.1).unwrap();
            let streamed =
                inverse_residual_with(&x, &fam, 0.1, &w, QtKernelMode::Corrected, Precision::Double).unwrap();
            oracle_gap = oracle_gap.max((direct - streamed.sup).abs());
        }
    }
    pass &= oracle_gap <= 1e-10;
    // The printed kernel on f_1 = 1 over the disk.
    let a = l.run("inverse_printed_f1.json");
    let status = a.table.column("status").unwrap();
    let residual = a.table.column("residual").unwrap();
    let printed = match &a.table.rows[0][residual] {
        qdbar_cli::table::Cell::Float(x) => *x,
        _ => f64::NAN,
    };
    let flagged = a.table.rows[0][status] == qdbar_cli::table::Cell::Text("expected_failure".into());
    let mut strict =
        parse_config(&std::fs::read_to_string(configs_dir().join("inverse_printed_f1.json")).unwrap()).unwrap();
    strict.expect_failure = false;
    let scratch = tempfile::tempdir().unwrap();
    let unflagged = run_experiment(&strict, Experiment::Inverse, scratch.path(), Format::Csv).unwrap();
    pass &= printed >= 0.1 && flagged && a.exit == ExitClass::Success && unflagged.exit == ExitClass::Property;
    l.record(
        6,
        "inverse property D_t Q_t = id",
        pass,
        format!(
            "max residual/bound {worst_ratio:.2e} ({}), oracle gap {oracle_gap:.1e}, printed f1 residual {printed:.4}",
            precisions.into_iter().collect::<Vec<_>>().join("/")
        ),
    );
}

fn classical_inverse(l: &mut Ledger) {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for fam in [disk(), annulus()] {
        let (a, b) = fam.s_interval();
        let grid: Vec<f64> = (0..100).map(|j| a + (b - a) * (j as f64 + 0.5) / 100.0).collect();
        for x in fixtures() {
            let back = apply_d0(&tilde_element(&x, &fam, QtKernelMode::Corrected).unwrap()).unwrap();
            let mut offsets: Vec<i64> = x.bands().iter().chain(back.bands().iter()).map(|(o, _)| *o).collect();
            offsets.sort_unstable();
            offsets.dedup();
            for o in offsets {
                let lhs = back.bands().into_iter().find(|(b, _)| *b == o).map(|(_, c)| c.clone());
                let rhs = x.bands().into_iter().find(|(b, _)| *b == o).map(|(_, c)| c.clone());
                for &s in &grid {
                    let u = lhs.as_ref().map_or(0.0, |c| c.eval(s).unwrap());
                    let v = rhs.as_ref().map_or(0.0, |c| c.eval(s).unwrap());
                    worst = worst.max((u - v).abs());
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = worst <= 1e-9 && secs < 5.0;
    l.record(7, "classical inverse D_0 Q_0 = id", pass, format!("max deviation {worst:.2e}, {secs:.2}s"));
}

fn series_line(a: &RunArtifacts, key: Option<&str>) -> (bool, f64, Option<f64>, Option<f64>) {
    let s = match key {
        Some(k) => &a.summary[k],
        None => &a.summary,
    };
    let dec = s["strictly_decreasing"].as_bool().unwrap_or(false);
    let red = s["reduction"].as_f64().unwrap_or(f64::NAN);
    let slope = s["rate_fit"]["slope"].as_f64();
    let used = s["rate_fit"]["points_used"].as_f64();
    (dec, red, slope, used)
}

fn norm_convergence(l: &mut Ledger) {
    let start = Instant::now();
    let mut pass = true;
    let mut parts = Vec::new();
    for name in ["norms_zbar_disk.json", "norms_zbar_annulus.json", "norms_mixed_disk.json", "norms_mixed_annulus.json"]
    {
        let a = l.run(name);
        let (dec, _, slope, _) = series_line(&a, None);
        let ok = a.exit == ExitClass::Success && dec && slope.is_some_and(|s| (0.7..=1.3).contains(&s));
        pass &= ok;
        let fit = match slope {
            Some(s) => format!("slope {s:.3}"),
            None => a.summary["rate_fit"]["error"].as_str().unwrap_or("no fit").to_owned(),
        };
        parts.push(format!("{}: decreasing={dec} {fit}", name.trim_start_matches("norms_").trim_end_matches(".json")));
    }
    let secs = start.elapsed().as_secs_f64();
    pass &= secs < 60.0;
    l.record(8, "norm convergence", pass, format!("{}; {secs:.1}s", parts.join("; ")));
}

fn parametrix_convergence(l: &mut Ledger) {
    let start = Instant::now();
    let mut pass = true;
    let mut parts = Vec::new();
    for name in [
        "parametrix_g2_disk.json",
        "parametrix_mixed_disk.json",
        "parametrix_g2_annulus.json",
        "parametrix_mixed_annulus.json",
    ] {
        let a = l.run(name);
        pass &= a.exit == ExitClass::Success;
        for mode in ["corrected", "printed"] {
            let (dec, red, slope, _) = series_line(&a, Some(mode));
            let ok = dec && red <= 0.25 && slope.is_some_and(|s| (0.4..=1.2).contains(&s));
            pass &= ok;
            parts.push(format!(
                "{}/{mode}: ratio {red:.3} slope {}",
                name.trim_start_matches("parametrix_").trim_end_matches(".json"),
                slope.map_or("none".into(), |s| format!("{s:.3}"))
            ));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    pass &= secs < 120.0;
    l.record(9, "parametrix convergence", pass, format!("{}; {secs:.1}s", parts.join("; ")));
}

fn uniform_boundedness(l: &mut Ledger) {
    let start = Instant::now();
    let mut pass = true;
    let mut worst_ratio = 0.0f64;
    for name in ["uniform_bound_disk.json", "uniform_bound_annulus.json"] {
        let a = l.run(name);
        pass &= a.exit == ExitClass::Success;
        let (r, c) = (a.table.column("max_ratio").unwrap(), a.table.column("schur_cap").unwrap());
        for row in &a.table.rows {
            if let (qdbar_cli::table::Cell::Float(r), qdbar_cli::table::Cell::Float(c)) = (&row[r], &row[c]) {
                worst_ratio = worst_ratio.max(r / c);
            } else {
                pass = false;
            }
        }
    }
    let mut kernels = 0usize;
    for name in ["schur_disk.json", "schur_annulus.json"] {
        let a = l.run(name);
        pass &= a.exit == ExitClass::Success;
        kernels += a.table.rows.len();
    }
    let secs = start.elapsed().as_secs_f64();
    pass &= secs < 60.0;
    l.record(
        10,
        "uniform boundedness of Q_t",
        pass,
        format!("max ratio/cap {worst_ratio:.3}, {kernels} kernel rows dominated, {secs:.1}s"),
    );
}

fn performance(l: &mut Ledger) {
    let fam = disk();
    let e = four_band_element();
    let w = IndexWindow::explicit(&fam, 0.1, 0, 9_999_999).unwrap();
    let start = Instant::now();
    let q = apply_qt(&e, &fam, 0.1, &w, QtKernelMode::Corrected, QtPath::Fast).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let stored: usize = q.bands().map(|(_, b)| b.len()).sum();
    let linear = stored == q.offsets().len() * w.len() as usize;
    let pass = secs <= 5.0 && linear && q.offsets().len() == 5;
    l.record(
        11,
        "fast Q_t at K = 1e7, N = 4",
        pass,
        format!("{secs:.2}s, {} bands, {:.0} MB of entries", q.offsets().len(), stored as f64 * 8.0 / 1e6),
    );
}

fn determinism(l: &mut Ledger) {
    let mut names: Vec<String> = std::fs::read_dir(configs_dir())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".json"))
        .collect();
    names.sort();
    let rerun = tempfile::tempdir().unwrap();
    let mut differing = Vec::new();
    for name in &names {
        let first = match l.outputs.get(name) {
            Some(b) => b.clone(),
            None => run_named(name, l.scratch.path()).1,
        };
        let (_, second) = run_named(name, rerun.path());
        if first != second {
            differing.push(name.clone());
        }
    }
    let detail = if differing.is_empty() {
        format!("{} configs byte-identical", names.len())
    } else {
        format!("differs: {}", differing.join(", "))
    };
    l.record(12, "deterministic CSV", differing.is_empty(), detail);
}

#[test]
fn acceptance() {
    let mut l = Ledger { results: Vec::new(), outputs: BTreeMap::new(), scratch: tempfile::tempdir().unwrap() };
    closed_form_moduli(&mut l);
    commutation_identity(&mut l);
    trace_identity(&mut l);
    ratio_margin(&mut l);
    fast_brute(&mut l);
    inverse_property(&mut l);
    classical_inverse(&mut l);
    norm_convergence(&mut l);
    parametrix_convergence(&mut l);
    uniform_boundedness(&mut l);
    performance(&mut l);
    determinism(&mut l);
    let failed: Vec<String> = l.results.iter().filter(|r| !r.2).map(|r| format!("[{:02}] {}", r.0, r.1)).collect();
    assert!(failed.is_empty(), "failing acceptance checks: {}", failed.join(", "));
}
