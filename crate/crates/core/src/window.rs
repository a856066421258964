//! Finite index windows with certified tail bounds.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::weights::{check_t, DomainKind, FamilyKind, WeightFamily};

/// A window `[k_lo, k_hi]` together with the `S_t` mass it omits.
///
/// `tail_bound_hi = w_+^2 - w_t(k_hi)^2` is exactly the mass above the
/// window; `tail_bound_lo = w_t(k_lo)^2 - w_-^2` dominates the mass below it
/// (zero on the disk, where the window starts at the first index).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndexWindow {
    pub k_lo: i64,
    pub k_hi: i64,
    pub tail_tol: f64,
    pub tail_bound_hi: f64,
    pub tail_bound_lo: f64,
}

impl IndexWindow {
    /// An explicitly chosen window; `tail_tol` is set to the larger of the
    /// two tail bounds so the window is valid by construction.
    pub fn explicit(family: &WeightFamily, t: f64, k_lo: i64, k_hi: i64) -> Result<Self> {
        check_t(t)?;
        if k_lo > k_hi {
            return Err(Error::Argument(format!("empty index window [{k_lo}, {k_hi}]")));
        }
        if family.domain() == DomainKind::Disk && k_lo != 0 {
            return Err(Error::Argument(format!("disk windows start at 0, got k_lo = {k_lo}")));
        }
        let (hi, lo) = tails(family, t, k_lo, k_hi);
        Ok(Self { k_lo, k_hi, tail_tol: hi.max(lo), tail_bound_hi: hi, tail_bound_lo: lo })
    }

    pub fn len(&self) -> u64 {
        (self.k_hi - self.k_lo + 1) as u64
    }

    pub fn is_empty(&self) -> bool {
        self.k_hi < self.k_lo
    }

    /// The larger of the two tail bounds.
    pub fn tail_bound(&self) -> f64 {
        self.tail_bound_hi.max(self.tail_bound_lo)
    }

    pub(crate) fn validate(&self, family: &WeightFamily) -> Result<()> {
        if self.k_lo > self.k_hi {
            return Err(Error::Argument("empty index window".into()));
        }
        if family.domain() == DomainKind::Disk && self.k_lo != 0 {
            return Err(Error::Argument("disk windows start at 0".into()));
        }
        Ok(())
    }
}

fn tails(family: &WeightFamily, t: f64, k_lo: i64, k_hi: i64) -> (f64, f64) {
    let hi = family.tail_above(t, k_hi);
    let lo = match family.domain() {
        DomainKind::Disk => 0.0,
        DomainKind::Annulus => family.tail_below(t, k_lo),
    };
    (hi, lo)
}

/// Smallest `k >= start` with `tail(k) <= tol`, for a nonincreasing `tail`.
fn first_within(guess: f64, start: i64, tol: f64, tail: impl Fn(i64) -> f64) -> i64 {
    let mut k =
        if guess.is_finite() { guess.ceil().max(start as f64).min(i64::MAX as f64 / 4.0) as i64 } else { start };
    while k > start && tail(k - 1) <= tol {
        k -= 1;
    }
    if tail(k) <= tol {
        return k;
    }
    // Guess fell short; gallop then bisect.
    let mut lo = k;
    let mut step = 1i64;
    let mut hi = k + step;
    while tail(hi) > tol {
        lo = hi;
        step = step.saturating_mul(2);
        hi = hi.saturating_add(step);
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if tail(mid) <= tol {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Smallest window whose tail bounds are both at most `tail_tol`.
pub fn truncation_window(family: &WeightFamily, t: f64, tail_tol: f64, k_cap: u64) -> Result<IndexWindow> {
    check_t(t)?;
    if !(tail_tol > 0.0) {
        return Err(Error::Argument(format!("tail_tol = {tail_tol} must be positive")));
    }
    // Closed-form starting points; the integer search makes them exact.
    let (guess_hi, guess_lo) = match family.kind() {
        FamilyKind::UnilateralExample => ((1.0 / tail_tol - 1.0) / t - 1.0, 0.0),
        FamilyKind::BilateralRational { beta, .. } => {
            let g = (beta / tail_tol - 1.0) / t;
            (g, g)
        }
        FamilyKind::BilateralArctan { beta, .. } => {
            let g =
                if tail_tol / beta >= std::f64::consts::FRAC_PI_2 { 0.0 } else { 1.0 / ((tail_tol / beta).tan() * t) };
            (g, g)
        }
    };
    let k_hi = first_within(guess_hi, 0, tail_tol, |k| family.tail_above(t, k));
    let k_lo = match family.domain() {
        DomainKind::Disk => 0,
        DomainKind::Annulus => -first_within(guess_lo, 0, tail_tol, |m| family.tail_below(t, -m)),
    };
    let needed = (k_hi - k_lo + 1) as u64;
    if needed > k_cap {
        return Err(Error::WindowTooLarge { t, needed, cap: k_cap });
    }
    let (hi, lo) = tails(family, t, k_lo, k_hi);
    Ok(IndexWindow { k_lo, k_hi, tail_tol, tail_bound_hi: hi, tail_bound_lo: lo })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unilateral_closed_form_window() {
        let u = WeightFamily::unilateral_example();
        let w = truncation_window(&u, 0.1, 1e-4, 10_000_000).unwrap();
        assert_eq!((w.k_lo, w.k_hi), (0, 99989));
        assert!(w.tail_bound_hi <= 1e-4);
    }

    #[test]
    fn whole_trace_within_tolerance_gives_minimal_window() {
        let u = WeightFamily::unilateral_example();
        let w = truncation_window(&u, 0.3, 1.0, 10).unwrap();
        assert_eq!((w.k_lo, w.k_hi), (0, 0));
    }

    #[test]
    fn rational_window_is_symmetric() {
        let r = WeightFamily::new(FamilyKind::BilateralRational { alpha: 1.0, beta: 0.5 }).unwrap();
        let w = truncation_window(&r, 0.1, 1e-3, 1_000_000).unwrap();
        assert_eq!(w.k_lo, -w.k_hi);
        // beta / (1 + t K) <= 1e-3  <=>  K >= 4990
        assert_eq!(w.k_hi, 4990);
        assert!(w.tail_bound_hi <= 1e-3 && w.tail_bound_lo <= 1e-3);
        assert!(r.tail_above(0.1, w.k_hi - 1) > 1e-3);
    }

    #[test]
    fn arctan_window_is_minimal() {
        let a = WeightFamily::new(FamilyKind::BilateralArctan { alpha: 2.0, beta: 0.5 }).unwrap();
        let w = truncation_window(&a, 0.05, 1e-4, 10_000_000).unwrap();
        assert!(w.tail_bound_hi <= 1e-4 && w.tail_bound_lo <= 1e-4);
        assert!(a.tail_above(0.05, w.k_hi - 1) > 1e-4);
        assert!(a.tail_below(0.05, w.k_lo + 1) > 1e-4);
    }

    #[test]
    fn cap_is_enforced() {
        let u = WeightFamily::unilateral_example();
        let err = truncation_window(&u, 0.01, 1e-6, 1000).unwrap_err();
        assert!(matches!(err, Error::WindowTooLarge { needed, .. } if needed > 1000));
    }
}
