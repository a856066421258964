//! Double-double arithmetic (an unevaluated sum `hi + lo` of two `f64`s,
//! about 106 bits of significand) and the small numeric trait that lets the
//! kernel scans run in either precision.
//!
//! Entries of `D_t` are differences of neighbours divided by `S_t(k)`, which
//! is around `1e-13` at the top of a `1e7`-index window. In `f64` the
//! rounding of the neighbours alone is then of order `1e-3`; carrying them in
//! double-double pushes that floor below `1e-15`.

use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::sum::NeumaierSum;
use crate::weights::{FamilyKind, WeightFamily};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };

    #[inline]
    pub fn new(x: f64) -> Self {
        Self { hi: x, lo: 0.0 }
    }

    #[inline]
    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn sqrt(self) -> Self {
        if self.hi <= 0.0 {
            return Self::ZERO;
        }
        let x = self.hi.sqrt();
        // One Newton step: x + (a - x^2) / (2x).
        let (p, e) = two_prod(x, x);
        let r = (self.hi - p - e + self.lo) / (2.0 * x);
        let (hi, lo) = quick_two_sum(x, r);
        Self { hi, lo }
    }

    pub fn abs(self) -> Self {
        if self.hi < 0.0 {
            -self
        } else {
            self
        }
    }
}

impl From<f64> for Dd {
    fn from(x: f64) -> Self {
        Self::new(x)
    }
}

impl Add for Dd {
    type Output = Dd;
    #[inline]
    fn add(self, o: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, o.hi);
        let (t, f) = two_sum(self.lo, o.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        Dd { hi, lo }
    }
}

impl Neg for Dd {
    type Output = Dd;
    #[inline]
    fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }
}

impl Sub for Dd {
    type Output = Dd;
    #[inline]
    fn sub(self, o: Dd) -> Dd {
        self + (-o)
    }
}

impl Mul for Dd {
    type Output = Dd;
    #[inline]
    fn mul(self, o: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, o.hi);
        let e = e + (self.hi * o.lo + self.lo * o.hi);
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }
}

impl Div for Dd {
    type Output = Dd;
    #[inline]
    fn div(self, o: Dd) -> Dd {
        let q1 = self.hi / o.hi;
        let r = self - o * Dd::new(q1);
        let q2 = r.hi / o.hi;
        let r = r - o * Dd::new(q2);
        let q3 = r.hi / o.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo } + Dd::new(q3)
    }
}

/// Arithmetic shared by `f64` and [`Dd`] in the kernel scans.
pub(crate) trait Real:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Div<Output = Self> + Neg<Output = Self>
{
    type Sum: Default + Copy;

    fn from_f64(x: f64) -> Self;
    fn to_f64(self) -> f64;
    fn sqrt(self) -> Self;
    fn accumulate(sum: &mut Self::Sum, x: Self);
    fn total(sum: &Self::Sum) -> Self;

    /// `(w_t(k)^2, S_t(k))`, or `None` when the family cannot be evaluated
    /// to this precision.
    fn weight_data(family: &WeightFamily, t: f64, k: i64) -> Option<(Self, Self)>;
}

impl Real for f64 {
    type Sum = NeumaierSum;

    #[inline]
    fn from_f64(x: f64) -> Self {
        x
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self
    }
    #[inline]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    #[inline]
    fn accumulate(sum: &mut NeumaierSum, x: f64) {
        sum.add(x);
    }
    #[inline]
    fn total(sum: &NeumaierSum) -> f64 {
        sum.value()
    }
    #[inline]
    fn weight_data(family: &WeightFamily, t: f64, k: i64) -> Option<(f64, f64)> {
        Some((family.weight_sq_unchecked(t, k), family.s_unchecked(t, k)))
    }
}

impl Real for Dd {
    type Sum = Dd;

    #[inline]
    fn from_f64(x: f64) -> Self {
        Dd::new(x)
    }
    #[inline]
    fn to_f64(self) -> f64 {
        Dd::to_f64(self)
    }
    #[inline]
    fn sqrt(self) -> Self {
        Dd::sqrt(self)
    }
    #[inline]
    fn accumulate(sum: &mut Dd, x: Dd) {
        *sum = *sum + x;
    }
    #[inline]
    fn total(sum: &Dd) -> Dd {
        *sum
    }

    /// Rational closed forms only; the arctan family would need an extended
    /// precision arctangent.
    fn weight_data(family: &WeightFamily, t: f64, k: i64) -> Option<(Dd, Dd)> {
        let td = Dd::new(t);
        let one = Dd::ONE;
        match family.kind() {
            FamilyKind::UnilateralExample => {
                if k < 0 {
                    return Some((Dd::ZERO, Dd::ZERO));
                }
                let x = Dd::new((k + 1) as f64) * td;
                let w2 = x / (one + x);
                let s = td / ((one + Dd::new(k as f64) * td) * (one + x));
                Some((w2, s))
            }
            FamilyKind::BilateralRational { alpha, beta } => {
                let kd = Dd::new(k as f64);
                let a = Dd::new((k as f64).abs());
                let b = Dd::new(((k - 1) as f64).abs());
                let w2 = Dd::new(alpha) + Dd::new(beta) * td * kd / (one + td * a);
                let s = Dd::new(beta) * td / ((one + td * a) * (one + td * b));
                Some((w2, s))
            }
            FamilyKind::BilateralArctan { .. } => None,
        }
    }
}
