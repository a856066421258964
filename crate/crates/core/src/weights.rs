//! Weight families `w_t(k)` of the quantum disk and annulus coordinates.
//!
//! A family is evaluated at a runtime deformation parameter `t`, so one value
//! serves a whole grid. Sequences on the disk are indexed by `k >= 0` and
//! extended by `w_t(k) = 0` for `k < 0`; on the annulus `k` ranges over all
//! integers.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sum::NeumaierSum;

/// Rounding allowance, relative to the total mass, for the trace check.
const TRACE_ROUNDING: f64 = 16.0 * f64::EPSILON;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DomainKind {
    /// Unilateral shift, index set `k >= 0`.
    Disk,
    /// Bilateral shift, index set all of `Z`.
    Annulus,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FamilyKind {
    /// `w_t(k)^2 = (k+1)t / (1 + (k+1)t)`.
    UnilateralExample,
    /// `w_t(k)^2 = alpha + beta t k / (1 + t|k|)`.
    BilateralRational { alpha: f64, beta: f64 },
    /// `w_t(k)^2 = alpha + beta atan(t k)`.
    BilateralArctan { alpha: f64, beta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightFamily {
    kind: FamilyKind,
    domain: DomainKind,
    w_plus: f64,
    w_minus: f64,
}

pub(crate) fn check_t(t: f64) -> Result<()> {
    if t > 0.0 && t <= 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(t))
    }
}

impl WeightFamily {
    /// Builds a family, validating its parameters.
    pub fn new(kind: FamilyKind) -> Result<Self> {
        let (domain, w_plus_sq, w_minus_sq) = match kind {
            FamilyKind::UnilateralExample => (DomainKind::Disk, 1.0, 0.0),
            FamilyKind::BilateralRational { alpha, beta } => {
                if !(alpha.is_finite() && beta.is_finite()) {
                    return Err(Error::InvalidParameter("alpha and beta must be finite".into()));
                }
                if beta <= 0.0 {
                    return Err(Error::InvalidParameter(format!("beta = {beta} must be positive")));
                }
                if alpha - beta <= 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "w_minus^2 = alpha - beta = {} < 0 (requires alpha > beta > 0)",
                        alpha - beta
                    )));
                }
                (DomainKind::Annulus, alpha + beta, alpha - beta)
            }
            FamilyKind::BilateralArctan { alpha, beta } => {
                if !(alpha.is_finite() && beta.is_finite()) {
                    return Err(Error::InvalidParameter("alpha and beta must be finite".into()));
                }
                if beta <= 0.0 {
                    return Err(Error::InvalidParameter(format!("beta = {beta} must be positive")));
                }
                let reach = beta * FRAC_PI_2;
                if alpha - reach <= 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "w_minus^2 = alpha - beta*pi/2 = {} < 0 (requires alpha > beta*pi/2 > 0)",
                        alpha - reach
                    )));
                }
                (DomainKind::Annulus, alpha + reach, alpha - reach)
            }
        };
        Ok(Self { kind, domain, w_plus: w_plus_sq.sqrt(), w_minus: w_minus_sq.sqrt() })
    }

    pub fn unilateral_example() -> Self {
        Self::new(FamilyKind::UnilateralExample).expect("valid builtin")
    }

    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    pub fn domain(&self) -> DomainKind {
        self.domain
    }

    pub fn w_plus(&self) -> f64 {
        self.w_plus
    }

    pub fn w_minus(&self) -> f64 {
        self.w_minus
    }

    /// `w_+^2`, exact from the parameters.
    pub fn w_plus_sq(&self) -> f64 {
        match self.kind {
            FamilyKind::UnilateralExample => 1.0,
            FamilyKind::BilateralRational { alpha, beta } => alpha + beta,
            FamilyKind::BilateralArctan { alpha, beta } => alpha + beta * FRAC_PI_2,
        }
    }

    /// `w_-^2`, exact from the parameters.
    pub fn w_minus_sq(&self) -> f64 {
        match self.kind {
            FamilyKind::UnilateralExample => 0.0,
            FamilyKind::BilateralRational { alpha, beta } => alpha - beta,
            FamilyKind::BilateralArctan { alpha, beta } => alpha - beta * FRAC_PI_2,
        }
    }

    /// `[w_-^2, w_+^2]`, the range of `s = r^2`.
    pub fn s_interval(&self) -> (f64, f64) {
        (self.w_minus_sq(), self.w_plus_sq())
    }

    /// `w_+^2 - w_-^2`, the trace of `S_t`.
    pub fn total_mass(&self) -> f64 {
        self.w_plus_sq() - self.w_minus_sq()
    }

    pub fn weight(&self, t: f64, k: i64) -> Result<f64> {
        check_t(t)?;
        Ok(self.weight_sq_unchecked(t, k).sqrt())
    }

    pub fn weight_sq(&self, t: f64, k: i64) -> Result<f64> {
        check_t(t)?;
        Ok(self.weight_sq_unchecked(t, k))
    }

    /// `S_t(k) = w_t(k)^2 - w_t(k-1)^2`, from closed forms that avoid the
    /// cancellation of the raw difference at large `|k|`.
    pub fn s_value(&self, t: f64, k: i64) -> Result<f64> {
        check_t(t)?;
        Ok(self.s_unchecked(t, k))
    }

    #[inline]
    pub(crate) fn weight_sq_unchecked(&self, t: f64, k: i64) -> f64 {
        match self.kind {
            FamilyKind::UnilateralExample => {
                if k < 0 {
                    0.0
                } else {
                    let x = (k + 1) as f64 * t;
                    x / (1.0 + x)
                }
            }
            FamilyKind::BilateralRational { alpha, beta } => {
                let kt = k as f64 * t;
                alpha + beta * kt / (1.0 + kt.abs())
            }
            FamilyKind::BilateralArctan { alpha, beta } => alpha + beta * (k as f64 * t).atan(),
        }
    }

    #[inline]
    pub(crate) fn weight_unchecked(&self, t: f64, k: i64) -> f64 {
        self.weight_sq_unchecked(t, k).sqrt()
    }

    #[inline]
    pub(crate) fn s_unchecked(&self, t: f64, k: i64) -> f64 {
        match self.kind {
            FamilyKind::UnilateralExample => {
                if k < 0 {
                    0.0
                } else {
                    let kf = k as f64;
                    t / ((1.0 + kf * t) * (1.0 + (kf + 1.0) * t))
                }
            }
            FamilyKind::BilateralRational { beta, .. } => {
                let a = (k as f64).abs();
                let b = ((k - 1) as f64).abs();
                beta * t / ((1.0 + t * a) * (1.0 + t * b))
            }
            FamilyKind::BilateralArctan { beta, .. } => {
                // atan(x) - atan(y) = atan((x - y) / (1 + xy)) whenever xy > -1,
                // which holds since k(k-1) >= 0 for integer k.
                let kf = k as f64;
                beta * (t / (1.0 + t * t * kf * (kf - 1.0))).atan()
            }
        }
    }

    /// Mass of `S_t` strictly above `k`: `w_+^2 - w_t(k)^2`.
    pub fn tail_above(&self, t: f64, k: i64) -> f64 {
        match self.kind {
            FamilyKind::UnilateralExample => {
                if k < 0 {
                    1.0
                } else {
                    1.0 / (1.0 + (k + 1) as f64 * t)
                }
            }
            FamilyKind::BilateralRational { beta, .. } if k >= 0 => beta / (1.0 + t * k as f64),
            FamilyKind::BilateralArctan { beta, .. } if k > 0 => beta * (1.0 / (t * k as f64)).atan(),
            _ => self.w_plus * self.w_plus - self.weight_sq_unchecked(t, k),
        }
    }

    /// `w_t(k)^2 - w_-^2`; dominates the mass of `S_t` strictly below `k`.
    pub fn tail_below(&self, t: f64, k: i64) -> f64 {
        match self.kind {
            FamilyKind::UnilateralExample => self.weight_sq_unchecked(t, k),
            FamilyKind::BilateralRational { beta, .. } if k <= 0 => beta / (1.0 + t * (k as f64).abs()),
            FamilyKind::BilateralArctan { beta, .. } if k < 0 => beta * (1.0 / (t * (k as f64).abs())).atan(),
            _ => self.weight_sq_unchecked(t, k) - self.w_minus * self.w_minus,
        }
    }

    /// A `t`-independent constant `C` with `w_t(k) <= C w_t(k-1)` for every `t`
    /// and every `k` whose predecessor lies in the index set.
    pub fn ratio_const(&self) -> f64 {
        match self.kind {
            // sup is w_t(1)/w_t(0) as t -> 0
            FamilyKind::UnilateralExample => std::f64::consts::SQRT_2,
            // w(k)^2 / w(k-1)^2 = 1 + S(k)/w(k-1)^2 with S <= beta t/(1+t) < beta/2
            FamilyKind::BilateralRational { alpha, beta } => (1.0 + beta / (2.0 * (alpha - beta))).sqrt(),
            // S <= beta atan(t) < beta pi/4
            FamilyKind::BilateralArctan { alpha, beta } => {
                (1.0 + beta * std::f64::consts::FRAC_PI_4 / (alpha - beta * FRAC_PI_2)).sqrt()
            }
        }
    }

    /// Smallest index of the index set, if bounded.
    pub fn first_index(&self) -> Option<i64> {
        match self.domain {
            DomainKind::Disk => Some(0),
            DomainKind::Annulus => None,
        }
    }

    /// Closed-form moduli of Conditions 3-5, where they are known.
    pub fn closed_form_h1(&self, t: f64) -> Option<f64> {
        match self.kind {
            FamilyKind::UnilateralExample => Some(t / (1.0 + t)),
            FamilyKind::BilateralRational { beta, .. } => Some(beta * t / (1.0 + t)),
            FamilyKind::BilateralArctan { beta, .. } => Some(beta * t.atan()),
        }
    }

    pub fn closed_form_h2(&self, t: f64) -> Option<f64> {
        match self.kind {
            FamilyKind::UnilateralExample => Some(2.0 * t / (1.0 + 2.0 * t)),
            // attained at k = -1, where S(0)/S(-1) = 1 + 2t
            FamilyKind::BilateralRational { .. } => Some(2.0 * t),
            FamilyKind::BilateralArctan { .. } => None,
        }
    }

    pub fn closed_form_h3(&self, k: i64) -> Option<f64> {
        match self.kind {
            FamilyKind::UnilateralExample if k >= 0 => {
                let kf = k as f64;
                Some(1.0 / (kf + 1.0 + (kf * kf + kf).sqrt()))
            }
            _ => None,
        }
    }
}

/// Per-family, per-grid numerical check of the weight conditions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub t_grid: Vec<f64>,
    pub k_lo: i64,
    pub k_hi: i64,
    pub tail_index: i64,
    /// `sup_k S_t(k)` over the window, per `t`.
    pub h1_values: Vec<f64>,
    /// `sup_k |1 - S_t(k+1)/S_t(k)|` over the window, per `t`.
    pub h2_values: Vec<f64>,
    pub h3_indices: Vec<i64>,
    /// `sup_t |1 - w_t(k-1)/w_t(k)|` over `h3_t_scan`, per `k` in `h3_indices`.
    pub h3_values: Vec<f64>,
    /// The grid plus probes down to `t = 1e-16`, where the sup is typically attained.
    pub h3_t_scan: Vec<f64>,
    pub monotonicity_ok: bool,
    pub positivity_ok: bool,
    /// `max_{k >= tail_index} |w_t(k) - w_+|` (and the mirror side on the annulus).
    pub limit_deviation: Vec<f64>,
    /// `|sum_window S_t(k) - (w_+^2 - w_-^2)|`, per `t`.
    pub trace_deviation: Vec<f64>,
    /// Analytic bound the trace deviation must respect, per `t`.
    pub trace_tail_bound: Vec<f64>,
    /// Empirical `sup w_t(k) / w_t(k-1)` over the scanned `(t, k)`.
    pub const_wratio: f64,
    /// `w_+^2 - w_-^2`.
    pub total_mass: f64,
    pub reference_h1: Option<Vec<f64>>,
    pub reference_h2: Option<Vec<f64>>,
    pub reference_h3: Option<Vec<f64>>,
}

fn max_delta(values: &[f64], reference: &Option<Vec<f64>>) -> Option<f64> {
    reference.as_ref().map(|r| values.iter().zip(r).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
}

impl ConditionReport {
    pub fn h1_delta(&self) -> Option<f64> {
        max_delta(&self.h1_values, &self.reference_h1)
    }

    pub fn h2_delta(&self) -> Option<f64> {
        max_delta(&self.h2_values, &self.reference_h2)
    }

    pub fn h3_delta(&self) -> Option<f64> {
        max_delta(&self.h3_values, &self.reference_h3)
    }

    /// Whether the trace deviation at grid point `i` sits within its tail
    /// bound, allowing summation rounding.
    pub fn trace_within(&self, i: usize) -> bool {
        self.trace_deviation[i] <= self.trace_tail_bound[i] + TRACE_ROUNDING * self.total_mass
    }

    /// True when every scanned trace deviation sits within its tail bound.
    pub fn trace_ok(&self) -> bool {
        (0..self.trace_deviation.len()).all(|i| self.trace_within(i))
    }

    pub fn all_ok(&self) -> bool {
        self.monotonicity_ok && self.positivity_ok && self.trace_ok() && self.const_wratio.is_finite()
    }
}

/// Probe values of `t` used to approximate `sup_{t in (0,1)}`.
fn t_probes(grid: &[f64]) -> Vec<f64> {
    let mut scan: Vec<f64> = grid.to_vec();
    scan.extend((1..=16).map(|j| 10f64.powi(-j)));
    scan.extend([0.5, 0.9, 0.999]);
    scan.sort_by(|a, b| b.partial_cmp(a).unwrap());
    scan.dedup();
    scan
}

fn clamp_window(family: &WeightFamily, k_lo: i64, k_hi: i64) -> Result<(i64, i64)> {
    let lo = match family.domain {
        DomainKind::Disk => k_lo.max(0),
        DomainKind::Annulus => k_lo,
    };
    if lo > k_hi {
        return Err(Error::Argument(format!("empty index window [{k_lo}, {k_hi}]")));
    }
    Ok((lo, k_hi))
}

/// `sup_k |1 - S_t(k+1)/S_t(k)|` for `k, k+1` in the window.
fn h2_on_window(family: &WeightFamily, t: f64, k_lo: i64, k_hi: i64) -> f64 {
    let mut prev = family.s_unchecked(t, k_lo);
    let mut sup = 0.0f64;
    for k in k_lo..k_hi {
        let next = family.s_unchecked(t, k + 1);
        sup = sup.max((1.0 - next / prev).abs());
        prev = next;
    }
    sup
}

/// Scans Conditions 1-5 and the trace identity on a grid and index window.
pub fn condition_report(
    family: &WeightFamily,
    t_grid: &[f64],
    window: (i64, i64),
    tail_index: i64,
) -> Result<ConditionReport> {
    if t_grid.is_empty() {
        return Err(Error::Argument("empty t grid".into()));
    }
    for &t in t_grid {
        check_t(t)?;
    }
    let (k_lo, k_hi) = clamp_window(family, window.0, window.1)?;
    let w_plus_sq = family.w_plus_sq();
    let w_minus_sq = family.w_minus_sq();

    let mut h1_values = Vec::with_capacity(t_grid.len());
    let mut h2_values = Vec::with_capacity(t_grid.len());
    let mut limit_deviation = Vec::with_capacity(t_grid.len());
    let mut trace_deviation = Vec::with_capacity(t_grid.len());
    let mut trace_tail_bound = Vec::with_capacity(t_grid.len());
    let mut monotonicity_ok = true;
    let mut positivity_ok = true;

    for &t in t_grid {
        let mut h1 = 0.0f64;
        let mut trace = NeumaierSum::default();
        let mut prev_w = family.weight_unchecked(t, k_lo - 1);
        let mut lim = 0.0f64;
        for k in k_lo..=k_hi {
            let s = family.s_unchecked(t, k);
            h1 = h1.max(s);
            trace.add(s);
            let w = family.weight_unchecked(t, k);
            if !(w > prev_w) {
                monotonicity_ok = false;
            }
            if !(w > 0.0 && s > 0.0) {
                positivity_ok = false;
            }
            if k >= tail_index {
                lim = lim.max((w - family.w_plus).abs());
            }
            if family.domain == DomainKind::Annulus && k <= -tail_index {
                lim = lim.max((w - family.w_minus).abs());
            }
            prev_w = w;
        }
        h1_values.push(h1);
        h2_values.push(h2_on_window(family, t, k_lo, k_hi));
        limit_deviation.push(lim);
        trace_deviation.push((trace.value() - (w_plus_sq - w_minus_sq)).abs());
        let mut bound = family.tail_above(t, k_hi);
        if family.domain == DomainKind::Annulus {
            bound += family.tail_below(t, k_lo);
        }
        trace_tail_bound.push(bound);
    }

    let h3_t_scan = t_probes(t_grid);
    let h3_indices: Vec<i64> = (k_lo..=k_hi).collect();
    let mut h3_values = Vec::with_capacity(h3_indices.len());
    let mut const_wratio = 0.0f64;
    for &k in &h3_indices {
        let mut sup = 0.0f64;
        for &t in &h3_t_scan {
            let below = family.weight_unchecked(t, k - 1);
            let here = family.weight_unchecked(t, k);
            sup = sup.max((1.0 - below / here).abs());
            if below > 0.0 {
                const_wratio = const_wratio.max(here / below);
            }
        }
        h3_values.push(sup);
    }

    let reference_h1 = t_grid.iter().map(|&t| family.closed_form_h1(t)).collect();
    let reference_h2 = t_grid.iter().map(|&t| family.closed_form_h2(t)).collect();
    let reference_h3 = h3_indices.iter().map(|&k| family.closed_form_h3(k)).collect();

    Ok(ConditionReport {
        t_grid: t_grid.to_vec(),
        k_lo,
        k_hi,
        tail_index,
        h1_values,
        h2_values,
        h3_indices,
        h3_values,
        h3_t_scan,
        monotonicity_ok,
        positivity_ok,
        limit_deviation,
        trace_deviation,
        trace_tail_bound,
        const_wratio,
        total_mass: family.total_mass(),
        reference_h1,
        reference_h2,
        reference_h3,
    })
}

/// Numerical certificate for the bound
/// `sup_k |S_t(k+n)/S_t(k) - 1| <= (2 + h_2(t))^{n-1} h_2(t)`:
/// returns the minimum slack over the window, with `h_2` taken on the same window.
pub fn s_ratio_margin(family: &WeightFamily, t: f64, n: usize, window: (i64, i64)) -> Result<f64> {
    check_t(t)?;
    if n == 0 {
        return Err(Error::Argument("n must be at least 1".into()));
    }
    let (k_lo, k_hi) = clamp_window(family, window.0, window.1)?;
    if k_hi - k_lo < 1 {
        return Err(Error::Argument("window needs at least two indices".into()));
    }
    let h2 = h2_on_window(family, t, k_lo, k_hi);
    let bound = (2.0 + h2).powi(n as i32 - 1) * h2;
    let n = n as i64;
    let mut margin = f64::INFINITY;
    // n = 1 pairs must coincide with the h2 scan exactly
    let last = if n == 1 { k_hi - 1 } else { k_hi };
    for k in k_lo..=last {
        let ratio = family.s_unchecked(t, k + n) / family.s_unchecked(t, k);
        margin = margin.min(bound - (ratio - 1.0).abs());
    }
    Ok(margin)
}
