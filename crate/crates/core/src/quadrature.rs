//! Globally adaptive Gauss-Kronrod (7/15) quadrature.

// Node tables are quoted to the digits they are published with.
#![allow(clippy::excessive_precision)]

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

/// Default absolute tolerance for coefficient integrals.
pub const DEFAULT_TOL: f64 = 1e-12;

/// Default cap on the number of live subintervals.
pub const DEFAULT_MAX_INTERVALS: usize = 4000;

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];

const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];

const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// Result of a converged integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

/// One 15-point Kronrod panel; returns (estimate, |K15 - G7|).
fn qk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Integrates `f` over `[a, b]` to absolute tolerance `tol`, bisecting the
/// panel with the largest error estimate until the summed estimate is below
/// `tol`. Integrable endpoint singularities are handled since the rule never
/// samples the endpoints.
pub fn integrate_with<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    tol: f64,
    max_intervals: usize,
) -> Result<Quadrature> {
    if !(a <= b) {
        return Err(Error::Argument(format!("integration bounds [{a}, {b}] out of order")));
    }
    if !(tol > 0.0) {
        return Err(Error::Argument("quadrature tolerance must be positive".into()));
    }
    if a == b {
        return Ok(Quadrature { value: 0.0, error: 0.0, evaluations: 0 });
    }
    let (value, error) = qk15(&mut f, a, b);
    let mut evaluations = 15;
    let mut heap = BinaryHeap::new();
    heap.push(Panel { a, b, value, error });
    let mut total = value;
    let mut total_err = error;
    while total_err > tol {
        if heap.len() >= max_intervals {
            return Err(Error::Quadrature { estimate: total, error: total_err });
        }
        let worst = heap.pop().expect("non-empty");
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) {
            // Panel width at machine resolution; nothing left to refine.
            return Err(Error::Quadrature { estimate: total, error: total_err });
        }
        let (v1, e1) = qk15(&mut f, worst.a, mid);
        let (v2, e2) = qk15(&mut f, mid, worst.b);
        evaluations += 30;
        heap.push(Panel { a: worst.a, b: mid, value: v1, error: e1 });
        heap.push(Panel { a: mid, b: worst.b, value: v2, error: e2 });
        // Resum from scratch to keep the running totals free of drift.
        let mut panels: Vec<&Panel> = heap.iter().collect();
        panels.sort_by(|x, y| x.a.total_cmp(&y.a));
        total = panels.iter().map(|p| p.value).sum();
        total_err = panels.iter().map(|p| p.error).sum();
    }
    if !total.is_finite() {
        return Err(Error::Quadrature { estimate: total, error: total_err });
    }
    Ok(Quadrature { value: total, error: total_err, evaluations })
}

/// Integrates `f` over `[a, b]` to absolute tolerance `tol` with the default
/// subdivision budget.
pub fn integrate<F: FnMut(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    integrate_with(f, a, b, tol, DEFAULT_MAX_INTERVALS).map(|q| q.value)
}

const GL4_X: [f64; 2] = [0.339981043584856264802665759103244, 0.861136311594052575223946488892809];
const GL4_W: [f64; 2] = [0.652145154862546142626936050778000, 0.347854845137453857373063949221999];

/// Four-point Gauss-Legendre rule, for short panels of smooth integrands.
#[inline]
pub fn gauss_legendre4<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64) -> f64 {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut acc = 0.0;
    for j in 0..2 {
        let dx = h * GL4_X[j];
        acc += GL4_W[j] * (f(c - dx) + f(c + dx));
    }
    acc * h
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn polynomial() {
        let v = integrate(|s| s * s, 0.0, 1.0, 1e-12).unwrap();
        assert_abs_diff_eq!(v, 1.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn inverse_three_halves() {
        let v = integrate(|u: f64| u.powf(-1.5), 0.01, 1.0, 1e-12).unwrap();
        assert_abs_diff_eq!(v, 18.0, epsilon = 1e-10);
    }

    #[test]
    fn sqrt_endpoint() {
        let v = integrate(f64::sqrt, 0.0, 1.0, 1e-12).unwrap();
        assert_abs_diff_eq!(v, 2.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn integrable_singularity() {
        let v = integrate(|u: f64| 1.0 / u.sqrt(), 0.0, 1.0, 1e-10).unwrap();
        assert_abs_diff_eq!(v, 2.0, epsilon = 1e-9);
    }

    #[test]
    fn budget_exhaustion_reports_estimate() {
        let err = integrate_with(|u: f64| 1.0 / u, 0.0, 1.0, 1e-12, 50).unwrap_err();
        assert!(matches!(err, Error::Quadrature { .. }));
    }

    #[test]
    fn bad_bounds() {
        assert!(integrate(|s| s, 1.0, 0.0, 1e-12).is_err());
        assert_eq!(integrate(|s| s, 0.3, 0.3, 1e-12).unwrap(), 0.0);
    }

    #[test]
    fn gl4_is_exact_to_degree_seven() {
        let v = gauss_legendre4(|x: f64| x.powi(7) + 3.0 * x.powi(2), 0.5, 2.0);
        let exact = (2f64.powi(8) - 0.5f64.powi(8)) / 8.0 + (8.0 - 0.125);
        assert_abs_diff_eq!(v, exact, epsilon = 1e-12);
    }
}
