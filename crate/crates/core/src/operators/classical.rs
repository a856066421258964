//! The classical operators on band coefficients: `D_0 = d/dzbar` and the
//! parametrix image `Q_0 x_0` (the tilde transforms).

use std::sync::Arc;

use crate::coefficient::{Anchor, CoefficientFunction, HalfSeries, Transform};
use crate::element::LambdaElement;
use crate::error::{Error, Result};
use crate::operators::qt::QtKernelMode;
use crate::weights::WeightFamily;

/// `Q_0 x_0` as an element.
///
/// `g~_n(s) = s^{-n/2} int_{w_-^2}^{s} g_{n-1}(u) u^{(n-1)/2} du` for
/// `n >= 1` (diagonal read as `g_0`). On the `f` side the output coefficient
/// is `-f~_n` with `f~_n(s) = s^{(n-1)/2} int_s^{w_+^2} f_{n+1}(u) u^{-n/2} du`
/// (`Printed`) or `s^{n/2} int_s^{w_+^2} f_{n+1}(u) u^{-(n+1)/2} du`
/// (`Corrected`).
pub fn tilde_element(elem: &LambdaElement, family: &WeightFamily, mode: QtKernelMode) -> Result<LambdaElement> {
    let interval = family.s_interval();
    let mut out = LambdaElement::zero();
    for (offset, c) in elem.bands() {
        let (target, transform) = if offset > 0 {
            let n = offset as i32 - 1;
            let (outer, weight) = match mode {
                QtKernelMode::Printed => (n - 1, -n),
                QtKernelMode::Corrected => (n, -(n + 1)),
            };
            (n as i64, Transform::new(c.clone(), outer, weight, Anchor::Upper, interval, -1.0))
        } else {
            let n = 1 - offset as i32;
            (-(n as i64), Transform::new(c.clone(), -n, n - 1, Anchor::Lower, interval, 1.0))
        };
        out.insert(target, CoefficientFunction::Transform(Arc::new(transform)));
    }
    Ok(out)
}

/// `D_0 x_0`: `f_n -> f_{n+1}`, `sqrt(s) f_n' - n/(2 sqrt(s)) f_n` (diagonal as
/// `f_0`) and `g_n -> g_{n-1}`, `sqrt(s) g_n' + n/(2 sqrt(s)) g_n`.
pub fn apply_d0(elem: &LambdaElement) -> Result<LambdaElement> {
    let root = HalfSeries::monomial(1, 1.0);
    let mut out = LambdaElement::zero();
    for (offset, c) in elem.bands() {
        let derivative = c.derivative().ok_or_else(|| Error::MissingDerivative { band: band_name(offset) })?;
        let n = offset.unsigned_abs() as f64;
        let (target, sign) = if offset >= 0 { (offset + 1, -1.0) } else { (offset + 1, 1.0) };
        let term = derivative.mul_series(&root).add(&c.mul_series(&HalfSeries::monomial(-1, sign * 0.5 * n)));
        out.insert(target, term);
    }
    Ok(out)
}

fn band_name(offset: i64) -> String {
    match offset {
        0 => "the diagonal".into(),
        b if b > 0 => format!("f_{b}"),
        b => format!("g_{}", -b),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::element::{BandSpec, Side};
    use approx::assert_abs_diff_eq;

    fn eval_band(e: &LambdaElement, offset: i64, s: f64) -> f64 {
        e.bands().into_iter().find(|(b, _)| *b == offset).map_or(0.0, |(_, c)| c.eval(s).unwrap())
    }

    #[test]
    fn d0_of_coordinates() {
        let zbar = apply_d0(&LambdaElement::coordinate("zbar").unwrap()).unwrap();
        assert_eq!(zbar.bands().len(), 1);
        assert_abs_diff_eq!(eval_band(&zbar, 0, 0.37), 1.0, epsilon = 1e-15);
        assert!(apply_d0(&LambdaElement::coordinate("z").unwrap()).unwrap().is_zero());
        assert!(apply_d0(&LambdaElement::coordinate("one").unwrap()).unwrap().is_zero());
        let zzbar = LambdaElement::from_bands(vec![BandSpec::new(
            Side::Diag,
            0,
            CoefficientFunction::poly(&[0.0, 1.0]).unwrap(),
        )])
        .unwrap();
        let d = apply_d0(&zzbar).unwrap();
        assert_eq!(d.f_band(1).unwrap().to_spec(), CoefficientFunction::sqrt_poly(&[1.0]).unwrap().to_spec());
    }

    #[test]
    fn tilde_of_one() {
        let disk = WeightFamily::unilateral_example();
        let one = LambdaElement::coordinate("one").unwrap();
        let y = tilde_element(&one, &disk, QtKernelMode::Corrected).unwrap();
        for s in [0.01, 0.3, 0.9] {
            assert_abs_diff_eq!(eval_band(&y, -1, s), s.sqrt(), epsilon = 1e-13);
        }
        let ann = WeightFamily::new(crate::weights::FamilyKind::BilateralRational { alpha: 1.0, beta: 0.5 }).unwrap();
        let y = tilde_element(&one, &ann, QtKernelMode::Printed).unwrap();
        for s in [0.5, 0.8, 1.4] {
            assert_abs_diff_eq!(eval_band(&y, -1, s), (s - 0.5) / s.sqrt(), epsilon = 1e-13);
        }
    }

    #[test]
    fn corrected_f_side_inverts() {
        let disk = WeightFamily::unilateral_example();
        let f1 =
            LambdaElement::from_bands(vec![BandSpec::new(Side::F, 1, CoefficientFunction::constant(1.0))]).unwrap();
        let y = tilde_element(&f1, &disk, QtKernelMode::Corrected).unwrap();
        for s in [0.04, 0.5, 1.0] {
            assert_abs_diff_eq!(eval_band(&y, 0, s), -2.0 * (1.0 - s.sqrt()), epsilon = 1e-12);
        }
        let back = apply_d0(&y).unwrap();
        for s in [0.04, 0.5, 0.99] {
            assert_abs_diff_eq!(eval_band(&back, 1, s), 1.0, epsilon = 1e-11);
        }
    }

    #[test]
    fn printed_f_side_leaves_a_residual() {
        // D_0 Q_0 (e^{i theta}) = e^{i theta} (1 + 1/r^2) / 2 with the printed kernel.
        let disk = WeightFamily::unilateral_example();
        let f1 =
            LambdaElement::from_bands(vec![BandSpec::new(Side::F, 1, CoefficientFunction::constant(1.0))]).unwrap();
        let back = apply_d0(&tilde_element(&f1, &disk, QtKernelMode::Printed).unwrap()).unwrap();
        for s in [0.1, 0.5, 0.9] {
            assert_abs_diff_eq!(eval_band(&back, 1, s), 0.5 * (1.0 + 1.0 / s), epsilon = 1e-10);
        }
    }
}
