//! Streamed right-inverse residual `sup |D_t Q_t x - x|`.
//!
//! Band `b` of `x` goes through one kernel of `Q_t` to band `b - 1`, and
//! `D_t` brings it back to band `b`. The residual on band `b` at base `k`
//! needs only two neighbouring entries of that one `Q_t` band, so each band
//! is checked during its own scan and nothing is materialized.

use serde::{Deserialize, Serialize};

use crate::coefficient::CoefficientFunction;
use crate::dd::{Dd, Real};
use crate::element::LambdaElement;
use crate::error::Result;
use crate::lattice::Lattice;
use crate::operators::qt::{scan_kernel_in, Kernel, QtKernelMode, MAX_KERNEL_BAND};
use crate::weights::{check_t, DomainKind, WeightFamily};
use crate::window::IndexWindow;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Precision {
    Double,
    DoubleDouble,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    /// Largest `|D_t Q_t x - x|` over checked entries.
    pub sup: f64,
    /// Base index where the largest deviation occurs.
    pub at: i64,
    /// Entries checked.
    pub checked: u64,
    pub precision: Precision,
}

/// `sup |D_t Q_t x - x|` over the entries `D_t` can form from the window
/// (the trusted range after one application of `D_t`: all but the upper
/// edge, and the lower edge on the annulus).
///
/// Runs in double-double whenever the family has rational weights and every
/// band of `x` is an exact series; otherwise in `f64`, whose rounding floor
/// is about `eps * |Q_t x| / S_t(k)` near the top of long windows.
pub fn inverse_residual_streamed(
    elem: &LambdaElement,
    family: &WeightFamily,
    t: f64,
    window: &IndexWindow,
    mode: QtKernelMode,
) -> Result<Residual> {
    check_t(t)?;
    window.validate(family)?;
    let top = elem.top_band();
    if top > MAX_KERNEL_BAND {
        return Err(crate::Error::KernelTooLong { n: top, cap: MAX_KERNEL_BAND });
    }
    let all_series = elem.bands().iter().all(|(_, c)| c.as_series().is_some());
    if all_series && Dd::weight_data(family, t, window.k_lo).is_some() {
        residual_in::<Dd>(elem, family, t, window, mode, Precision::DoubleDouble)
    } else {
        residual_in::<f64>(elem, family, t, window, mode, Precision::Double)
    }
}

/// Residual in a fixed precision.
pub fn inverse_residual_with(
    elem: &LambdaElement,
    family: &WeightFamily,
    t: f64,
    window: &IndexWindow,
    mode: QtKernelMode,
    precision: Precision,
) -> Result<Residual> {
    match precision {
        Precision::Double => residual_in::<f64>(elem, family, t, window, mode, precision),
        Precision::DoubleDouble => residual_in::<Dd>(elem, family, t, window, mode, precision),
    }
}

fn residual_in<R: Real>(
    elem: &LambdaElement,
    family: &WeightFamily,
    t: f64,
    window: &IndexWindow,
    mode: QtKernelMode,
    precision: Precision,
) -> Result<Residual> {
    let mut out = Residual { sup: 0.0, at: window.k_lo, checked: 0, precision };
    for (b, c) in elem.bands() {
        band_residual::<R>(b, c, family, t, window, mode, &mut out)?;
    }
    Ok(out)
}

fn band_residual<R: Real>(
    b: i64,
    c: &CoefficientFunction,
    family: &WeightFamily,
    t: f64,
    window: &IndexWindow,
    mode: QtKernelMode,
    out: &mut Residual,
) -> Result<()> {
    let kernel = Kernel::for_input(b);
    let mut x_sampler = c.sampler();
    let mut input_sampler = c.sampler();
    let series = c.as_series();
    let eval = |s: R, sampler: &mut crate::coefficient::Sampler<'_>| -> Result<R> {
        match series {
            Some(h) => Ok(h.eval_real(s)),
            None => Ok(R::from_f64(sampler.value_at(s.to_f64())?)),
        }
    };
    // The disk has a genuine lower boundary: entries below index 0 vanish.
    let lower_is_boundary = family.domain() == DomainKind::Disk;
    let mut prev: Option<R> = None;
    let mut visit = |k: i64, q: R, lat: &Lattice<R>| -> Result<()> {
        let neighbour = match (prev, b >= 1) {
            (Some(p), _) => Some(p),
            (None, false) if lower_is_boundary => Some(R::from_f64(0.0)),
            _ => None,
        };
        prev = Some(q);
        let Some(p) = neighbour else {
            return Ok(());
        };
        if k == window.k_hi || (k == window.k_lo && !lower_is_boundary) {
            return Ok(());
        }
        let d = if b >= 1 {
            // (k+b, k): Q(k+1) w(k) - w(k+b-1) Q(k)
            (p * lat.w(k) - lat.w(k + b - 1) * q) / (lat.rs(k + b) * lat.rs(k))
        } else {
            // (k, k+m): Q(k) w(k+m) - w(k-1) Q(k-1), m = -b
            let m = -b;
            (q * lat.w(k + m) - lat.w(k - 1) * p) / (lat.rs(k) * lat.rs(k + m))
        };
        let x = eval(lat.w2(k), &mut x_sampler)?;
        let r = (d - x).to_f64().abs();
        out.checked += 1;
        if r > out.sup || r.is_nan() {
            out.sup = r;
            out.at = k;
        }
        Ok(())
    };
    let scanned = match series {
        Some(h) => scan_kernel_in::<R, _, _>(kernel, mode, family, t, window, |s| Ok(h.eval_real(s)), &mut visit),
        None => scan_kernel_in::<R, _, _>(
            kernel,
            mode,
            family,
            t,
            window,
            |s: R| Ok(R::from_f64(input_sampler.value_at(s.to_f64())?)),
            &mut visit,
        ),
    };
    scanned
        .unwrap_or_else(|| Err(crate::Error::Argument("family weights are unavailable in extended precision".into())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::element::{BandSpec, Side};
    use crate::operators::{apply_qt, dt_residual_sup, QtPath};
    use crate::weights::FamilyKind;

    fn mixed() -> LambdaElement {
        LambdaElement::from_bands(vec![
            BandSpec::new(Side::F, 1, CoefficientFunction::poly(&[1.0, 0.5]).unwrap()),
            BandSpec::new(Side::Diag, 0, CoefficientFunction::poly(&[0.2, 0.0, 1.0]).unwrap()),
            BandSpec::new(Side::G, 2, CoefficientFunction::sqrt_poly(&[1.0, -1.0]).unwrap()),
        ])
        .unwrap()
    }

    #[test]
    fn streamed_matches_materialized() {
        let fams = [
            WeightFamily::unilateral_example(),
            WeightFamily::new(FamilyKind::BilateralRational { alpha: 1.0, beta: 0.5 }).unwrap(),
        ];
        for fam in fams {
            let lo = if fam.domain() == DomainKind::Disk { 0 } else { -200 };
            let w = IndexWindow::explicit(&fam, 0.5, lo, 300).unwrap();
            for mode in [QtKernelMode::Corrected, QtKernelMode::Printed] {
                let q = apply_qt(&mixed(), &fam, 0.5, &w, mode, QtPath::Brute).unwrap();
                let direct = dt_residual_sup(&q, &mixed(), &fam, 0.5).unwrap();
                let streamed = inverse_residual_with(&mixed(), &fam, 0.5, &w, mode, Precision::Double).unwrap();
                // Both sides sit on rounding noise when the kernel is exact, and
                // the brute and fast paths round differently.
                assert!((direct - streamed.sup).abs() <= 1e-10 * direct.max(1.0), "{direct} vs {}", streamed.sup);
                if mode == QtKernelMode::Corrected {
                    assert!(streamed.sup < 1e-9, "{}", streamed.sup);
                }
            }
        }
    }

    #[test]
    fn double_double_removes_the_rounding_floor() {
        let fam = WeightFamily::unilateral_example();
        let one = LambdaElement::coordinate("one").unwrap();
        let w = IndexWindow::explicit(&fam, 0.1, 0, 3_000_000).unwrap();
        let dd = inverse_residual_streamed(&one, &fam, 0.1, &w, QtKernelMode::Corrected).unwrap();
        assert_eq!(dd.precision, Precision::DoubleDouble);
        assert!(dd.sup < 1e-12, "{}", dd.sup);
        let plain = inverse_residual_with(&one, &fam, 0.1, &w, QtKernelMode::Corrected, Precision::Double).unwrap();
        assert!(plain.sup > 100.0 * dd.sup);
    }
}
