use proptest::prelude::*;
use qdbar_core::coefficient::{CoefficientFunction, HalfSeries};
use qdbar_core::element::{BandSpec, LambdaElement, Side};
use qdbar_core::operators::{apply_qt, QtKernelMode, QtPath};
use qdbar_core::sum::NeumaierSum;
use qdbar_core::weights::{DomainKind, FamilyKind, WeightFamily};
use qdbar_core::window::IndexWindow;

fn family() -> impl Strategy<Value = WeightFamily> {
    prop_oneof![
        Just(WeightFamily::unilateral_example()),
        (0.1f64..2.0, 0.05f64..0.95).prop_map(|(beta, frac)| WeightFamily::new(FamilyKind::BilateralRational {
            alpha: beta / frac,
            beta
        })
        .unwrap()),
        (0.1f64..1.0, 0.05f64..0.95).prop_map(|(beta, frac)| {
            let alpha = beta * std::f64::consts::FRAC_PI_2 / frac;
            WeightFamily::new(FamilyKind::BilateralArctan { alpha, beta }).unwrap()
        }),
    ]
}

fn band() -> impl Strategy<Value = BandSpec> {
    (0usize..3, 0usize..5, prop::collection::vec(-2.0f64..2.0, 1..4)).prop_map(|(side, n, c)| {
        let (side, n) = match (side, n) {
            (_, 0) | (0, _) => (Side::Diag, 0),
            (1, n) => (Side::F, n),
            (_, n) => (Side::G, n),
        };
        BandSpec::new(side, n, CoefficientFunction::poly(&c).unwrap())
    })
}

fn element() -> impl Strategy<Value = LambdaElement> {
    prop::collection::vec(band(), 1..4).prop_map(|mut bands| {
        bands.sort_by_key(|b| (b.side, b.n));
        bands.dedup_by_key(|b| (b.side, b.n));
        LambdaElement::from_bands(bands).unwrap()
    })
}

fn window(family: &WeightFamily, t: f64, len: i64) -> IndexWindow {
    let lo = if family.domain() == DomainKind::Disk { 0 } else { -len / 2 };
    IndexWindow::explicit(family, t, lo, lo + len - 1).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn commutator_is_positive_and_telescopes(family in family(), t in 1e-3f64..1.0, k in -5000i64..5000) {
        let k = if family.domain() == DomainKind::Disk { k.abs() } else { k };
        let s = family.s_value(t, k).unwrap();
        prop_assert!(s > 0.0);
        let prev = if family.domain() == DomainKind::Disk && k == 0 { 0.0 } else { family.weight_sq(t, k - 1).unwrap() };
        let diff = family.weight_sq(t, k).unwrap() - prev;
        prop_assert!((s - diff).abs() <= 1e-12 * family.w_plus_sq().max(1.0), "{} vs {}", s, diff);
    }

    #[test]
    fn tail_bounds_cover_the_missing_mass(family in family(), t in 1e-2f64..1.0, len in 2i64..3000) {
        let w = window(&family, t, len);
        let mut sum = NeumaierSum::default();
        for k in w.k_lo..=w.k_hi {
            sum.add(family.s_value(t, k).unwrap());
        }
        let missing = family.total_mass() - sum.value();
        prop_assert!(missing >= -1e-13);
        prop_assert!(missing <= w.tail_bound_hi + w.tail_bound_lo + 1e-13);
    }

    #[test]
    fn fast_and_brute_paths_agree(family in family(), t in 0.02f64..1.0, x in element(), printed in any::<bool>()) {
        let mode = if printed { QtKernelMode::Printed } else { QtKernelMode::Corrected };
        let w = window(&family, t, 300);
        let fast = apply_qt(&x, &family, t, &w, mode, QtPath::Fast).unwrap();
        let brute = apply_qt(&x, &family, t, &w, mode, QtPath::Brute).unwrap();
        prop_assert_eq!(fast.offsets(), brute.offsets());
        for (offset, b) in brute.bands() {
            let f = fast.band(offset).unwrap();
            let scale = b.iter().fold(1e-300f64, |m, v| m.max(v.abs()));
            for (u, v) in f.iter().zip(b) {
                prop_assert!((u - v).abs() <= 1e-11 * scale, "band {}: {} vs {}", offset, u, v);
            }
        }
    }

    #[test]
    fn quantum_norm_splits_over_bands(family in family(), t in 0.05f64..1.0, x in element()) {
        let w = window(&family, t, 2000);
        let whole = x.quantum_norm_sq(&family, t, &w).unwrap();
        let parts: f64 = x.bands().iter().map(|(b, _)| x.single_band(*b).quantum_norm_sq(&family, t, &w).unwrap()).sum();
        prop_assert!((whole - parts).abs() <= 1e-12 * whole.max(1e-300));
    }

    #[test]
    fn qt_is_linear(family in family(), t in 0.05f64..1.0, x in element(), c in -3.0f64..3.0) {
        let scaled = LambdaElement::from_bands(
            x.to_bands().into_iter().map(|b| BandSpec::new(b.side, b.n, b.func.mul_series(&HalfSeries::poly(&[c])))).collect(),
        ).unwrap();
        let w = window(&family, t, 200);
        let a = apply_qt(&x, &family, t, &w, QtKernelMode::Corrected, QtPath::Fast).unwrap();
        let b = apply_qt(&scaled, &family, t, &w, QtKernelMode::Corrected, QtPath::Fast).unwrap();
        for (offset, v) in a.bands() {
            let Some(u) = b.band(offset) else { prop_assert!(c == 0.0 || v.iter().all(|x| *x == 0.0)); continue };
            for (p, q) in v.iter().zip(u) {
                prop_assert!((c * p - q).abs() <= 1e-12 * (1.0 + p.abs() * c.abs()));
            }
        }
    }
}
