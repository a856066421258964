//! Truncated banded realizations over an index window.
//!
//! Band `b` holds the entries at offset `row - col = b`. Each band is stored
//! by its *base index* `k = min(row, col)`: `(k + n, k)` for `b = n >= 0` and
//! `(k, k + n)` for `b = -n`. This is the index at which the coefficient
//! function is sampled, so a realization is a plain evaluation per band.

use std::collections::BTreeMap;

use crate::element::LambdaElement;
use crate::error::{Error, Result};
use crate::lattice::Lattice;
use crate::sum::NeumaierSum;
use crate::weights::{check_t, DomainKind, WeightFamily};
use crate::window::IndexWindow;

#[derive(Debug, Clone, PartialEq)]
pub struct BandMatrix {
    window: IndexWindow,
    domain: DomainKind,
    bands: BTreeMap<i64, Vec<f64>>,
    valid_margin: i64,
}

/// `(base index, offset)` of the entry `(row, col)`.
#[inline]
pub fn base_of(row: i64, col: i64) -> (i64, i64) {
    (row.min(col), row - col)
}

/// `(row, col)` of the entry at `base` on band `offset`.
#[inline]
pub fn entry_of(base: i64, offset: i64) -> (i64, i64) {
    if offset >= 0 {
        (base + offset, base)
    } else {
        (base, base - offset)
    }
}

impl BandMatrix {
    pub fn new(window: IndexWindow, domain: DomainKind) -> Self {
        Self { window, domain, bands: BTreeMap::new(), valid_margin: 0 }
    }

    pub fn window(&self) -> &IndexWindow {
        &self.window
    }

    pub fn domain(&self) -> DomainKind {
        self.domain
    }

    pub fn valid_margin(&self) -> i64 {
        self.valid_margin
    }

    pub(crate) fn set_valid_margin(&mut self, margin: i64) {
        self.valid_margin = margin;
    }

    /// Offsets of the stored bands, ascending.
    pub fn offsets(&self) -> Vec<i64> {
        self.bands.keys().copied().collect()
    }

    pub fn band(&self, offset: i64) -> Option<&[f64]> {
        self.bands.get(&offset).map(Vec::as_slice)
    }

    pub fn bands(&self) -> impl Iterator<Item = (i64, &[f64])> {
        self.bands.iter().map(|(&b, v)| (b, v.as_slice()))
    }

    /// Stores a band; `values[j]` is the entry at base index `k_lo + j`.
    pub fn insert_band(&mut self, offset: i64, values: Vec<f64>) -> Result<()> {
        if values.len() as u64 != self.window.len() {
            return Err(Error::Argument(format!(
                "band {offset} has {} entries, window holds {}",
                values.len(),
                self.window.len()
            )));
        }
        self.bands.insert(offset, values);
        Ok(())
    }

    /// Entry `(row, col)`; zero off the stored bands or outside the window.
    pub fn get(&self, row: i64, col: i64) -> f64 {
        let (base, offset) = base_of(row, col);
        if base < self.window.k_lo || base > self.window.k_hi {
            return 0.0;
        }
        self.bands.get(&offset).map_or(0.0, |v| v[(base - self.window.k_lo) as usize])
    }

    /// Base indices whose entries are trusted. On the disk the lower edge is
    /// a genuine boundary, so only the upper edge loses trust.
    pub fn trusted_range(&self) -> (i64, i64) {
        let lo = match self.domain {
            DomainKind::Disk => self.window.k_lo,
            DomainKind::Annulus => self.window.k_lo + self.valid_margin,
        };
        (lo, self.window.k_hi - self.valid_margin)
    }

    /// `self - other` on a common window; the margin is the larger of the two.
    pub fn sub(&self, other: &BandMatrix) -> Result<BandMatrix> {
        if self.window.k_lo != other.window.k_lo || self.window.k_hi != other.window.k_hi {
            return Err(Error::Argument("band matrices live on different windows".into()));
        }
        let mut out = BandMatrix::new(self.window, self.domain);
        out.valid_margin = self.valid_margin.max(other.valid_margin);
        let len = self.window.len() as usize;
        let mut offsets = self.offsets();
        offsets.extend(other.offsets());
        offsets.sort_unstable();
        offsets.dedup();
        for b in offsets {
            let values = match (self.band(b), other.band(b)) {
                (Some(x), Some(y)) => x.iter().zip(y).map(|(p, q)| p - q).collect(),
                (Some(x), None) => x.to_vec(),
                (None, Some(y)) => y.iter().map(|q| -q).collect(),
                (None, None) => vec![0.0; len],
            };
            out.bands.insert(b, values);
        }
        Ok(out)
    }

    /// Largest `|entry|` over trusted base indices.
    pub fn max_abs_trusted(&self) -> f64 {
        let (lo, hi) = self.trusted_range();
        let mut m = 0.0f64;
        for v in self.bands.values() {
            for k in lo..=hi {
                m = m.max(v[(k - self.window.k_lo) as usize].abs());
            }
        }
        m
    }
}

/// Samples every band of `elem` at `w_t(k)^2` over the window.
pub fn realize_quantum(
    elem: &LambdaElement,
    family: &WeightFamily,
    t: f64,
    window: &IndexWindow,
) -> Result<BandMatrix> {
    check_t(t)?;
    window.validate(family)?;
    let lat = Lattice::new(family, t, window.k_lo, window.k_hi);
    let s: Vec<f64> = (window.k_lo..=window.k_hi).map(|k| lat.w2(k)).collect();
    let mut out = BandMatrix::new(*window, family.domain());
    for (offset, c) in elem.bands() {
        out.insert_band(offset, c.sample_increasing(&s)?)?;
    }
    Ok(out)
}

/// `sqrt(sum_{i,j} S_t(i)^{1/2} S_t(j)^{1/2} |a_ij|^2)` over the stored
/// entries, each band summed by ascending base index, bands in ascending
/// offset.
pub fn quantum_norm(a: &BandMatrix, family: &WeightFamily, t: f64) -> Result<f64> {
    let (lo, hi) = (a.window.k_lo, a.window.k_hi);
    Ok(norm_sq_over(a, family, t, lo, hi)?.sqrt())
}

/// As [`quantum_norm`], restricted to trusted base indices.
pub fn quantum_norm_trusted(a: &BandMatrix, family: &WeightFamily, t: f64) -> Result<f64> {
    let (lo, hi) = a.trusted_range();
    if lo > hi {
        return Ok(0.0);
    }
    Ok(norm_sq_over(a, family, t, lo, hi)?.sqrt())
}

fn norm_sq_over(a: &BandMatrix, family: &WeightFamily, t: f64, lo: i64, hi: i64) -> Result<f64> {
    check_t(t)?;
    let top = a.bands.keys().map(|b| b.abs()).max().unwrap_or(0);
    let lat = Lattice::new(family, t, lo, hi + top);
    let mut total = 0.0;
    for (&b, v) in &a.bands {
        let off = b.abs();
        let mut acc = NeumaierSum::default();
        for k in lo..=hi {
            let x = v[(k - a.window.k_lo) as usize];
            acc.add(lat.rs(k) * lat.rs(k + off) * x * x);
        }
        total += acc.value();
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficient::CoefficientFunction;
    use crate::element::{BandSpec, Side};
    use crate::weights::FamilyKind;
    use crate::window::truncation_window;
    use approx::assert_relative_eq;

    #[test]
    fn coordinates_realize_as_expected() {
        let fam = WeightFamily::unilateral_example();
        let w = IndexWindow::explicit(&fam, 0.3, 0, 50).unwrap();
        let zbar = realize_quantum(&LambdaElement::coordinate("zbar").unwrap(), &fam, 0.3, &w).unwrap();
        assert_eq!(zbar.offsets(), vec![-1]);
        for j in 0..=50 {
            assert_relative_eq!(zbar.get(j, j + 1), fam.weight(0.3, j).unwrap(), max_relative = 1e-15);
        }
        let one = realize_quantum(&LambdaElement::coordinate("one").unwrap(), &fam, 0.3, &w).unwrap();
        assert!(one.band(0).unwrap().iter().all(|&x| x == 1.0));
        let f1 =
            LambdaElement::from_bands(vec![BandSpec::new(Side::F, 1, CoefficientFunction::constant(1.0))]).unwrap();
        let f1 = realize_quantum(&f1, &fam, 0.3, &w).unwrap();
        assert!(f1.band(1).unwrap().iter().all(|&x| x == 1.0));
        assert_eq!(f1.get(5, 4), 1.0);
        assert_eq!(f1.get(4, 5), 0.0);
    }

    #[test]
    fn norm_of_one_is_truncated_trace() {
        let fam = WeightFamily::unilateral_example();
        let w = truncation_window(&fam, 0.2, 1e-4, 1 << 24).unwrap();
        let one = realize_quantum(&LambdaElement::coordinate("one").unwrap(), &fam, 0.2, &w).unwrap();
        let n = quantum_norm(&one, &fam, 0.2).unwrap();
        assert_relative_eq!(n * n, 1.0 - w.tail_bound_hi, max_relative = 1e-13);
    }

    #[test]
    fn single_entry_norm() {
        let fam = WeightFamily::new(FamilyKind::BilateralRational { alpha: 1.0, beta: 0.5 }).unwrap();
        let w = IndexWindow::explicit(&fam, 0.5, -10, 10).unwrap();
        let mut a = BandMatrix::new(w, DomainKind::Annulus);
        let mut band = vec![0.0; 21];
        band[13] = 2.5; // base 3, entry (3, 5)
        a.insert_band(-2, band).unwrap();
        let n = quantum_norm(&a, &fam, 0.5).unwrap();
        let expect = fam.s_value(0.5, 3).unwrap().sqrt() * fam.s_value(0.5, 5).unwrap().sqrt() * 6.25;
        assert_relative_eq!(n * n, expect, max_relative = 1e-15);
    }

    #[test]
    fn entry_addressing_round_trips() {
        for (base, off) in [(3, 0), (3, 2), (3, -2), (-4, -1)] {
            let (r, c) = entry_of(base, off);
            assert_eq!(base_of(r, c), (base, off));
        }
    }
}
