//! Cross-checks against dense linear algebra built straight from the weights.

use nalgebra::DMatrix;
use qdbar_core::band::BandMatrix;
use qdbar_core::coefficient::CoefficientFunction;
use qdbar_core::element::{BandSpec, LambdaElement, Side};
use qdbar_core::limits::centred_window;
use qdbar_core::operators::kernel::{
    dense_normalized_kernel, operator_norm_estimate, schur_young_bound, KernelOperatorSpec,
};
use qdbar_core::operators::{apply_qt, dt_residual_sup, Kernel, QtKernelMode, QtPath};
use qdbar_core::weights::{DomainKind, FamilyKind, WeightFamily};
use qdbar_core::window::IndexWindow;

fn poly(side: Side, n: usize, c: &[f64]) -> BandSpec {
    BandSpec::new(side, n, CoefficientFunction::poly(c).unwrap())
}

fn sqrt_poly(side: Side, n: usize, c: &[f64]) -> BandSpec {
    BandSpec::new(side, n, CoefficientFunction::sqrt_poly(c).unwrap())
}

fn element(bands: Vec<BandSpec>) -> LambdaElement {
    LambdaElement::from_bands(bands).unwrap()
}

fn families() -> [WeightFamily; 2] {
    [
        WeightFamily::unilateral_example(),
        WeightFamily::new(FamilyKind::BilateralRational { alpha: 1.0, beta: 0.5 }).unwrap(),
    ]
}

fn window(family: &WeightFamily, t: f64, len: i64) -> IndexWindow {
    let lo = if family.domain() == DomainKind::Disk { 0 } else { -len / 2 };
    IndexWindow::explicit(family, t, lo, lo + len - 1).unwrap()
}

fn dense(a: &BandMatrix, w: &IndexWindow) -> DMatrix<f64> {
    let n = w.len() as usize;
    DMatrix::from_fn(n, n, |i, j| a.get(w.k_lo + i as i64, w.k_lo + j as i64))
}

/// `S^{-1/2} (A U - U A) S^{-1/2}` with the shift written out as a matrix.
fn dense_dt(a: &DMatrix<f64>, family: &WeightFamily, t: f64, w: &IndexWindow) -> DMatrix<f64> {
    let n = a.nrows();
    let k = |i: usize| w.k_lo + i as i64;
    let shift = DMatrix::from_fn(n, n, |i, j| if i == j + 1 { family.weight(t, k(j)).unwrap() } else { 0.0 });
    let c = a * &shift - &shift * a;
    let rs: Vec<f64> = (0..n).map(|i| family.s_value(t, k(i)).unwrap().sqrt()).collect();
    DMatrix::from_fn(n, n, |i, j| c[(i, j)] / (rs[i] * rs[j]))
}

/// Entry `(row, col)` of the quantization of `x`.
fn symbol_entry(x: &LambdaElement, family: &WeightFamily, t: f64, row: i64, col: i64) -> f64 {
    x.bands()
        .into_iter()
        .find(|(b, _)| *b == row - col)
        .map_or(0.0, |(_, c)| c.eval(family.weight_sq(t, row.min(col)).unwrap()).unwrap())
}

#[test]
fn dense_commutator_inverts_qt_in_the_interior() {
    let x = element(vec![
        poly(Side::F, 2, &[0.5, 1.0, -1.0]),
        sqrt_poly(Side::F, 1, &[1.0]),
        poly(Side::Diag, 0, &[0.2, 0.0, 1.0]),
        poly(Side::G, 1, &[1.0, 0.0, 1.0]),
        poly(Side::G, 3, &[-0.3, 0.7]),
    ]);
    for family in families() {
        for t in [0.3, 0.1] {
            let w = window(&family, t, 400);
            let q = apply_qt(&x, &family, t, &w, QtKernelMode::Corrected, QtPath::Brute).unwrap();
            let d = dense_dt(&dense(&q, &w), &family, t, &w);
            // The window edge is missing terms of the sums; stay clear of it.
            let margin = 6usize;
            let (from, to) = match family.domain() {
                DomainKind::Disk => (0, 400 - margin),
                DomainKind::Annulus => (margin, 400 - margin),
            };
            let mut worst = 0.0f64;
            for i in from..to {
                for j in from..to {
                    let (row, col) = (w.k_lo + i as i64, w.k_lo + j as i64);
                    worst = worst.max((d[(i, j)] - symbol_entry(&x, &family, t, row, col)).abs());
                }
            }
            assert!(worst < 1e-9, "{:?} t={t}: dense residual {worst:e}", family.domain());
            let library = dt_residual_sup(&q, &x, &family, t).unwrap();
            assert!(library < 1e-9, "library residual {library:e}");
        }
    }
}

#[test]
fn svd_matches_power_iteration() {
    let kernels = [Kernel::T1(0), Kernel::T1(1), Kernel::T1(3), Kernel::T2(1), Kernel::T2(2), Kernel::T2(4)];
    for family in families() {
        for t in [0.5, 0.05] {
            let w = centred_window(&family, t, 500).unwrap();
            for kernel in kernels {
                for mode in [QtKernelMode::Corrected, QtKernelMode::Printed] {
                    let spec = KernelOperatorSpec { kernel, t, family, window: w };
                    let rows = dense_normalized_kernel(&spec, mode).unwrap();
                    let m = DMatrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j]);
                    let sigma = m.singular_values().max();
                    let est = operator_norm_estimate(&spec, mode, 20_000).unwrap();
                    let schur = schur_young_bound(&spec, mode).unwrap();
                    let rel = (est.value - sigma).abs() / sigma;
                    assert!(rel <= 1e-8, "{kernel:?} {mode:?} t={t}: power {} vs svd {sigma} ({rel:e})", est.value);
                    assert!(
                        sigma <= schur.bound * (1.0 + 1e-12),
                        "{kernel:?}: svd {sigma} above Schur {}",
                        schur.bound
                    );
                }
            }
        }
    }
}

#[test]
fn g_side_kernels_do_not_depend_on_mode() {
    let x = element(vec![poly(Side::Diag, 0, &[0.2, 0.0, 1.0]), poly(Side::G, 2, &[1.0, -1.0])]);
    for family in families() {
        let w = window(&family, 0.2, 300);
        let a = apply_qt(&x, &family, 0.2, &w, QtKernelMode::Corrected, QtPath::Fast).unwrap();
        let b = apply_qt(&x, &family, 0.2, &w, QtKernelMode::Printed, QtPath::Fast).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn norm_of_one_is_the_trace_minus_its_tails() {
    let one = element(vec![poly(Side::Diag, 0, &[1.0])]);
    for family in families() {
        for t in [0.5, 0.01] {
            let w = window(&family, t, 20_000);
            let norm_sq = one.quantum_norm_sq(&family, t, &w).unwrap();
            let below = match family.domain() {
                DomainKind::Disk => 0.0,
                DomainKind::Annulus => family.tail_below(t, w.k_lo - 1),
            };
            let expected = family.total_mass() - w.tail_bound_hi - below;
            assert!((norm_sq - expected).abs() <= 1e-13, "{norm_sq} vs {expected}");
            assert!(below <= w.tail_bound_lo);
            let classical = one.classical_norm_sq(&family).unwrap();
            assert!((classical - norm_sq).abs() <= w.tail_bound_hi + w.tail_bound_lo + 1e-13);
        }
    }
}

#[test]
fn zbar_norm_telescopes() {
    // ||zbar_t||^2 = sum_k S(k)^{1/2} S(k+1)^{1/2} w(k)^2, checked term by term.
    let zbar = element(vec![sqrt_poly(Side::G, 1, &[1.0])]);
    let family = WeightFamily::unilateral_example();
    let t = 0.2;
    let w = window(&family, t, 5000);
    let mut direct = 0.0;
    for k in w.k_lo..=w.k_hi {
        let s = |k| family.s_value(t, k).unwrap();
        direct += (s(k) * s(k + 1)).sqrt() * family.weight_sq(t, k).unwrap();
    }
    let lib = zbar.quantum_norm_sq(&family, t, &w).unwrap();
    assert!((lib - direct).abs() <= 1e-13 * direct, "{lib} vs {direct}");
}
