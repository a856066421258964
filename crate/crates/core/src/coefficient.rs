//! Coefficient functions of `s = r^2`.
//!
//! Polynomials and `sqrt(s)`-scaled polynomials are both finite sums of half
//! powers `s^{p/2}`, so they share one exact representation, [`HalfSeries`],
//! closed under differentiation and multiplication by `s^{±1/2}`. The
//! classical parametrix produces integral transforms, evaluated by quadrature
//! and differentiated through the fundamental theorem of calculus.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dd::Real;
use crate::error::{Error, Result};
use crate::quadrature::{self, gauss_legendre4};

/// `sum_j coeffs[j] * s^{(lowest + j)/2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfSeries {
    lowest: i32,
    coeffs: Vec<f64>,
}

impl HalfSeries {
    pub fn new(lowest: i32, coeffs: Vec<f64>) -> Self {
        let mut s = Self { lowest, coeffs };
        s.trim();
        s
    }

    pub fn zero() -> Self {
        Self { lowest: 0, coeffs: Vec::new() }
    }

    /// `c s^{p/2}`.
    pub fn monomial(half_power: i32, c: f64) -> Self {
        Self::new(half_power, vec![c])
    }

    /// Polynomial in `s` with ascending coefficients.
    pub fn poly(coeffs: &[f64]) -> Self {
        let mut dense = vec![0.0; coeffs.len().saturating_mul(2).saturating_sub(1)];
        for (i, &c) in coeffs.iter().enumerate() {
            dense[2 * i] = c;
        }
        Self::new(0, dense)
    }

    /// `sqrt(s) * poly(s)`.
    pub fn sqrt_poly(coeffs: &[f64]) -> Self {
        let mut s = Self::poly(coeffs);
        if !s.coeffs.is_empty() {
            s.lowest += 1;
        }
        s
    }

    fn trim(&mut self) {
        while self.coeffs.last() == Some(&0.0) {
            self.coeffs.pop();
        }
        let lead = self.coeffs.iter().take_while(|&&c| c == 0.0).count();
        if lead > 0 {
            self.coeffs.drain(..lead);
            self.lowest += lead as i32;
        }
        if self.coeffs.is_empty() {
            self.lowest = 0;
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn lowest_half_power(&self) -> i32 {
        self.lowest
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    fn coeff_at(&self, p: i32) -> f64 {
        let idx = p - self.lowest;
        if idx < 0 {
            0.0
        } else {
            self.coeffs.get(idx as usize).copied().unwrap_or(0.0)
        }
    }

    fn highest(&self) -> i32 {
        self.lowest + self.coeffs.len() as i32 - 1
    }

    /// True when only integer powers of `s` occur.
    fn integral_powers(&self) -> bool {
        self.coeffs.iter().enumerate().all(|(j, &c)| c == 0.0 || (self.lowest + j as i32) % 2 == 0)
    }

    /// Ascending coefficients if this is a polynomial in `s`.
    pub fn as_poly(&self) -> Option<Vec<f64>> {
        if self.is_zero() {
            return Some(vec![0.0]);
        }
        if self.lowest < 0 || self.lowest % 2 != 0 || !self.integral_powers() {
            return None;
        }
        let top = self.highest() / 2;
        Some((0..=top).map(|i| self.coeff_at(2 * i)).collect())
    }

    /// Ascending coefficients of `p` if this is `sqrt(s) p(s)`.
    pub fn as_sqrt_poly(&self) -> Option<Vec<f64>> {
        if self.is_zero() || self.lowest < 1 || self.lowest % 2 != 1 {
            return None;
        }
        let shifted = Self::new(self.lowest - 1, self.coeffs.clone());
        shifted.as_poly()
    }

    #[inline]
    pub fn eval(&self, s: f64) -> f64 {
        if self.coeffs.is_empty() {
            return 0.0;
        }
        if self.lowest % 2 == 0 && self.integral_powers() {
            // Horner in s over the even slots.
            let mut acc = 0.0;
            let mut j = self.coeffs.len() as isize - 1;
            if (self.lowest + j as i32) % 2 != 0 {
                j -= 1;
            }
            while j >= 0 {
                acc = acc * s + self.coeffs[j as usize];
                j -= 2;
            }
            return acc * pow_half(s, self.lowest);
        }
        let x = s.sqrt();
        let mut acc = 0.0;
        for &c in self.coeffs.iter().rev() {
            acc = acc * x + c;
        }
        acc * pow_half(s, self.lowest)
    }

    /// Evaluation in another precision, by explicit powers of `sqrt(s)`.
    pub(crate) fn eval_real<R: Real>(&self, s: R) -> R {
        if self.coeffs.is_empty() {
            return R::from_f64(0.0);
        }
        let root = s.sqrt();
        let one = R::from_f64(1.0);
        let mut power = one;
        for _ in 0..self.lowest.unsigned_abs() {
            power = power * root;
        }
        if self.lowest < 0 {
            power = one / power;
        }
        let mut acc = R::from_f64(0.0);
        for &c in &self.coeffs {
            if c != 0.0 {
                acc = acc + R::from_f64(c) * power;
            }
            power = power * root;
        }
        acc
    }

    pub fn derivative(&self) -> Self {
        let coeffs = self.coeffs.iter().enumerate().map(|(j, &c)| c * 0.5 * (self.lowest + j as i32) as f64).collect();
        Self::new(self.lowest - 2, coeffs)
    }

    pub fn add(&self, other: &Self) -> Self {
        if self.is_zero() {
            return other.clone();
        }
        if other.is_zero() {
            return self.clone();
        }
        let lo = self.lowest.min(other.lowest);
        let hi = self.highest().max(other.highest());
        let coeffs = (lo..=hi).map(|p| self.coeff_at(p) + other.coeff_at(p)).collect();
        Self::new(lo, coeffs)
    }

    pub fn scale(&self, c: f64) -> Self {
        Self::new(self.lowest, self.coeffs.iter().map(|x| x * c).collect())
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        let mut coeffs = vec![0.0; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                coeffs[i + j] += a * b;
            }
        }
        Self::new(self.lowest + other.lowest, coeffs)
    }
}

/// `s^{p/2}` without `powf`.
#[inline]
pub(crate) fn pow_half(s: f64, p: i32) -> f64 {
    if p == 0 {
        return 1.0;
    }
    let whole = s.powi(p.div_euclid(2));
    if p.rem_euclid(2) == 1 {
        whole * s.sqrt()
    } else {
        whole
    }
}

/// Which endpoint of the integration range is fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Anchor {
    /// `int_{lo}^{s}`.
    Lower,
    /// `int_{s}^{hi}`.
    Upper,
}

/// `scale * s^{a/2} * int h(u) u^{b/2} du`, the integral running from the
/// anchored endpoint to `s`. Exponents are stored as half-integers (`a`, `b`
/// count halves).
#[derive(Debug, Clone)]
pub struct Transform {
    pub(crate) inner: CoefficientFunction,
    pub(crate) outer_half_power: i32,
    pub(crate) weight_half_power: i32,
    pub(crate) anchor: Anchor,
    pub(crate) lo: f64,
    pub(crate) hi: f64,
    pub(crate) scale: f64,
    pub(crate) tol: f64,
}

impl Transform {
    pub fn new(
        inner: CoefficientFunction,
        outer_half_power: i32,
        weight_half_power: i32,
        anchor: Anchor,
        interval: (f64, f64),
        scale: f64,
    ) -> Self {
        Self {
            inner,
            outer_half_power,
            weight_half_power,
            anchor,
            lo: interval.0,
            hi: interval.1,
            scale,
            tol: quadrature::DEFAULT_TOL,
        }
    }

    #[inline]
    fn integrand(&self, u: f64) -> f64 {
        self.inner.eval_unchecked(u) * pow_half(u, self.weight_half_power)
    }

    fn anchored_integral(&self, s: f64) -> Result<f64> {
        // Arguments that round past the anchor carry no mass.
        let s = s.clamp(self.lo, self.hi);
        match self.anchor {
            Anchor::Lower => quadrature::integrate(|u| self.integrand(u), self.lo, s, self.tol),
            Anchor::Upper => quadrature::integrate(|u| self.integrand(u), s, self.hi, self.tol),
        }
    }

    /// The value at `s = 0` when it is fixed by the outer power alone.
    fn origin_value(&self, s: f64) -> Option<f64> {
        let vanishes = self.outer_half_power > 0 || (self.outer_half_power < 0 && self.anchor == Anchor::Lower);
        (s == 0.0 && vanishes).then_some(0.0)
    }

    fn finish(&self, s: f64, integral: f64) -> f64 {
        self.origin_value(s).unwrap_or_else(|| self.scale * pow_half(s, self.outer_half_power) * integral)
    }

    pub fn eval(&self, s: f64) -> Result<f64> {
        if let Some(v) = self.origin_value(s) {
            return Ok(v);
        }
        let integral = self.anchored_integral(s)?;
        Ok(self.finish(s, integral))
    }

    /// A stateful evaluator for sequences of `s` moving away from the anchor.
    pub fn cursor(&self) -> TransformCursor<'_> {
        TransformCursor { transform: self, last: None }
    }

    /// `d/ds` via the fundamental theorem of calculus:
    /// `(a/2)/s * T(s) ± scale * h(s) s^{(a+b)/2}`.
    fn derivative(self: &Arc<Self>) -> CoefficientFunction {
        let sign = match self.anchor {
            Anchor::Lower => 1.0,
            Anchor::Upper => -1.0,
        };
        let own = HalfSeries::monomial(-2, 0.5 * self.outer_half_power as f64);
        let boundary = HalfSeries::monomial(self.outer_half_power + self.weight_half_power, sign * self.scale);
        CoefficientFunction::combination(vec![
            (own, CoefficientFunction::Transform(Arc::clone(self))),
            (boundary, self.inner.clone()),
        ])
    }
}

/// Relative panel width below which the four-point rule replaces adaptive
/// quadrature when stepping a cursor.
const CURSOR_SHORT_PANEL: f64 = 1e-2;

/// Evaluates a [`Transform`] along a monotone sequence of arguments by
/// accumulating the integral panel by panel.
pub struct TransformCursor<'a> {
    transform: &'a Transform,
    last: Option<(f64, f64)>,
}

impl TransformCursor<'_> {
    /// Value at `s`. Arguments must move away from the anchor (increasing for
    /// [`Anchor::Lower`], decreasing for [`Anchor::Upper`]); otherwise the
    /// integral is restarted from the anchor.
    pub fn value_at(&mut self, s: f64) -> Result<f64> {
        let tr = self.transform;
        if let Some(v) = tr.origin_value(s) {
            self.last = None;
            return Ok(v);
        }
        let integral = match self.last {
            Some((prev, acc)) if s == prev => acc,
            Some((prev, acc))
                if (tr.anchor == Anchor::Lower && s > prev) || (tr.anchor == Anchor::Upper && s < prev) =>
            {
                let (a, b) = if s > prev { (prev, s) } else { (s, prev) };
                let panel = if a > 0.0 && (b - a) <= CURSOR_SHORT_PANEL * a {
                    gauss_legendre4(|u| tr.integrand(u), a, b)
                } else {
                    quadrature::integrate(|u| tr.integrand(u), a, b, tr.tol)?
                };
                acc + panel
            }
            _ => tr.anchored_integral(s)?,
        };
        self.last = Some((s, integral));
        Ok(tr.finish(s, integral))
    }
}

/// Streaming evaluator for a [`CoefficientFunction`] along a monotone
/// sequence of arguments; transforms advance their cursors.
pub(crate) enum Sampler<'a> {
    Series(&'a HalfSeries),
    Transform(TransformCursor<'a>),
    Combination(Vec<(&'a HalfSeries, Sampler<'a>)>),
}

impl Sampler<'_> {
    pub(crate) fn value_at(&mut self, s: f64) -> Result<f64> {
        match self {
            Self::Series(series) => Ok(series.eval(s)),
            Self::Transform(cursor) => cursor.value_at(s),
            Self::Combination(terms) => {
                let mut acc = 0.0;
                for (m, c) in terms.iter_mut() {
                    acc += m.eval(s) * c.value_at(s)?;
                }
                Ok(acc)
            }
        }
    }
}

/// A real function of `s` on `[w_-^2, w_+^2]`.
#[derive(Debug, Clone)]
pub enum CoefficientFunction {
    Series(HalfSeries),
    Transform(Arc<Transform>),
    /// `sum_i m_i(s) * c_i(s)`.
    Combination(Arc<Vec<(HalfSeries, CoefficientFunction)>>),
}

impl PartialEq for CoefficientFunction {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Self::Series(a), Self::Series(b)) => a == b,
            (Self::Transform(a), Self::Transform(b)) => Arc::ptr_eq(a, b),
            (Self::Combination(a), Self::Combination(b)) => Arc::ptr_eq(a, b),
            _ => false,
        }
    }
}

impl fmt::Display for CoefficientFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Series(s) => {
                if let Some(p) = s.as_poly() {
                    write!(f, "poly{p:?}")
                } else if let Some(p) = s.as_sqrt_poly() {
                    write!(f, "sqrt_poly{p:?}")
                } else {
                    write!(f, "half_series(lowest={}, {:?})", s.lowest, s.coeffs)
                }
            }
            Self::Transform(_) => write!(f, "transform"),
            Self::Combination(_) => write!(f, "combination"),
        }
    }
}

impl CoefficientFunction {
    /// Polynomial in `s`, ascending coefficients. Empty input is rejected.
    pub fn poly(coeffs: &[f64]) -> Result<Self> {
        check_coeffs(coeffs)?;
        Ok(Self::Series(HalfSeries::poly(coeffs)))
    }

    /// `sqrt(s) * poly(s)`.
    pub fn sqrt_poly(coeffs: &[f64]) -> Result<Self> {
        check_coeffs(coeffs)?;
        Ok(Self::Series(HalfSeries::sqrt_poly(coeffs)))
    }

    pub fn constant(c: f64) -> Self {
        Self::Series(HalfSeries::poly(&[c]))
    }

    pub fn zero() -> Self {
        Self::Series(HalfSeries::zero())
    }

    pub fn combination(terms: Vec<(HalfSeries, CoefficientFunction)>) -> Self {
        let terms: Vec<_> = terms.into_iter().filter(|(m, _)| !m.is_zero()).collect();
        if terms.is_empty() {
            return Self::zero();
        }
        Self::Combination(Arc::new(terms))
    }

    pub fn as_series(&self) -> Option<&HalfSeries> {
        match self {
            Self::Series(s) => Some(s),
            _ => None,
        }
    }

    /// Identically zero by construction (not by evaluation).
    pub fn is_zero(&self) -> bool {
        matches!(self, Self::Series(s) if s.is_zero())
    }

    /// Whether [`CoefficientFunction::derivative`] succeeds.
    pub fn derivative_available(&self) -> bool {
        match self {
            Self::Series(_) => true,
            Self::Transform(_) => true,
            Self::Combination(terms) => terms.iter().all(|(_, c)| c.derivative_available()),
        }
    }

    pub fn derivative(&self) -> Option<Self> {
        match self {
            Self::Series(s) => Some(Self::Series(s.derivative())),
            Self::Transform(t) => Some(t.derivative()),
            Self::Combination(terms) => {
                let mut out = Vec::with_capacity(2 * terms.len());
                for (m, c) in terms.iter() {
                    out.push((m.derivative(), c.clone()));
                    out.push((m.clone(), c.derivative()?));
                }
                Some(Self::combination(out))
            }
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        match (self, other) {
            (Self::Series(a), Self::Series(b)) => Self::Series(a.add(b)),
            _ if self.is_zero() => other.clone(),
            _ if other.is_zero() => self.clone(),
            _ => Self::combination(vec![
                (HalfSeries::poly(&[1.0]), self.clone()),
                (HalfSeries::poly(&[1.0]), other.clone()),
            ]),
        }
    }

    /// `m(s) * self(s)`, kept exact for series.
    pub fn mul_series(&self, m: &HalfSeries) -> Self {
        match self {
            Self::Series(s) => Self::Series(s.mul(m)),
            _ => Self::combination(vec![(m.clone(), self.clone())]),
        }
    }

    pub fn eval(&self, s: f64) -> Result<f64> {
        match self {
            Self::Series(series) => Ok(series.eval(s)),
            Self::Transform(t) => t.eval(s),
            Self::Combination(terms) => {
                let mut acc = 0.0;
                for (m, c) in terms.iter() {
                    acc += m.eval(s) * c.eval(s)?;
                }
                Ok(acc)
            }
        }
    }

    /// Evaluation for integrands; a quadrature failure yields NaN, which the
    /// enclosing quadrature reports as non-convergence.
    #[inline]
    pub(crate) fn eval_unchecked(&self, s: f64) -> f64 {
        match self {
            Self::Series(series) => series.eval(s),
            _ => self.eval(s).unwrap_or(f64::NAN),
        }
    }

    /// Values at an increasing sequence of arguments. Transforms are stepped
    /// panel by panel instead of being re-integrated at every point.
    pub fn sample_increasing(&self, s_values: &[f64]) -> Result<Vec<f64>> {
        match self {
            Self::Series(series) => Ok(s_values.iter().map(|&s| series.eval(s)).collect()),
            Self::Transform(t) => {
                let mut out = vec![0.0; s_values.len()];
                let mut cursor = t.cursor();
                match t.anchor {
                    Anchor::Lower => {
                        for (o, &s) in out.iter_mut().zip(s_values) {
                            *o = cursor.value_at(s)?;
                        }
                    }
                    Anchor::Upper => {
                        for (o, &s) in out.iter_mut().zip(s_values).rev() {
                            *o = cursor.value_at(s)?;
                        }
                    }
                }
                Ok(out)
            }
            Self::Combination(terms) => {
                let mut out = vec![0.0; s_values.len()];
                for (m, c) in terms.iter() {
                    let inner = c.sample_increasing(s_values)?;
                    for ((o, &s), v) in out.iter_mut().zip(s_values).zip(inner) {
                        *o += m.eval(s) * v;
                    }
                }
                Ok(out)
            }
        }
    }

    pub(crate) fn sampler(&self) -> Sampler<'_> {
        match self {
            Self::Series(series) => Sampler::Series(series),
            Self::Transform(t) => Sampler::Transform(t.cursor()),
            Self::Combination(terms) => Sampler::Combination(terms.iter().map(|(m, c)| (m, c.sampler())).collect()),
        }
    }

    /// Spec fragment (`poly` / `sqrt_poly`) for exact series; `None` otherwise.
    pub fn to_spec(&self) -> Option<CoefficientSpec> {
        let series = self.as_series()?;
        if let Some(coeffs) = series.as_poly() {
            Some(CoefficientSpec::Poly { coeffs })
        } else {
            series.as_sqrt_poly().map(|coeffs| CoefficientSpec::SqrtPoly { coeffs })
        }
    }
}

fn check_coeffs(coeffs: &[f64]) -> Result<()> {
    if coeffs.is_empty() {
        return Err(Error::InvalidParameter("empty polynomial".into()));
    }
    if coeffs.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidParameter("non-finite polynomial coefficient".into()));
    }
    Ok(())
}

/// Serializable description of an exact coefficient function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CoefficientSpec {
    Poly { coeffs: Vec<f64> },
    SqrtPoly { coeffs: Vec<f64> },
}

impl CoefficientSpec {
    pub fn build(&self) -> Result<CoefficientFunction> {
        match self {
            Self::Poly { coeffs } => CoefficientFunction::poly(coeffs),
            Self::SqrtPoly { coeffs } => CoefficientFunction::sqrt_poly(coeffs),
        }
    }
}
