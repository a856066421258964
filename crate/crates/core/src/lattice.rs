//! Weights and `S_t^{1/2}` tabulated over contiguous index ranges.
//!
//! Long windows (10^7 and more indices) are processed in chunks so memory
//! stays bounded; every consumer walks chunks in a fixed order, which keeps
//! reductions deterministic.

use crate::dd::Real;
use crate::weights::WeightFamily;

/// Number of indices per chunk.
pub(crate) const CHUNK: i64 = 1 << 16;

/// `w_t(k)`, `w_t(k)^2` and `S_t(k)^{1/2}` for `k` in `[lo, hi]`.
#[derive(Debug, Clone)]
pub(crate) struct Lattice<R = f64> {
    lo: i64,
    w: Vec<R>,
    w2: Vec<R>,
    rs: Vec<R>,
}

impl Lattice<f64> {
    pub(crate) fn new(family: &WeightFamily, t: f64, lo: i64, hi: i64) -> Self {
        Self::try_new(family, t, lo, hi).expect("f64 weights are always available")
    }
}

impl<R: Real> Lattice<R> {
    /// `None` when the family cannot be tabulated in `R`.
    pub(crate) fn try_new(family: &WeightFamily, t: f64, lo: i64, hi: i64) -> Option<Self> {
        let len = (hi - lo + 1).max(0) as usize;
        let mut w = Vec::with_capacity(len);
        let mut w2 = Vec::with_capacity(len);
        let mut rs = Vec::with_capacity(len);
        for k in lo..=hi {
            let (sq, s) = R::weight_data(family, t, k)?;
            w2.push(sq);
            w.push(sq.sqrt());
            rs.push(s.sqrt());
        }
        Some(Self { lo, w, w2, rs })
    }

    #[inline(always)]
    fn idx(&self, k: i64) -> usize {
        (k - self.lo) as usize
    }

    #[inline(always)]
    pub(crate) fn w(&self, k: i64) -> R {
        self.w[self.idx(k)]
    }

    #[inline(always)]
    pub(crate) fn w2(&self, k: i64) -> R {
        self.w2[self.idx(k)]
    }

    /// `S_t(k)^{1/2}`.
    #[inline(always)]
    pub(crate) fn rs(&self, k: i64) -> R {
        self.rs[self.idx(k)]
    }

    /// `w_t(k) w_t(k+1) ... w_t(k+len-1)`, an empty product being 1.
    #[inline(always)]
    pub(crate) fn run_product(&self, k: i64, len: usize) -> R {
        let start = self.idx(k);
        self.w[start..start + len].iter().fold(R::from_f64(1.0), |acc, &x| acc * x)
    }
}

/// Splits `[lo, hi]` into consecutive chunks `(c_lo, c_hi)`.
pub(crate) fn chunks(lo: i64, hi: i64) -> Vec<(i64, i64)> {
    let mut out = Vec::new();
    let mut a = lo;
    while a <= hi {
        let b = (a + CHUNK - 1).min(hi);
        out.push((a, b));
        a = b + 1;
    }
    out
}

/// Calls `body` with a lattice padded by `pad_lo` / `pad_hi` indices around
/// each chunk of `[lo, hi]`, in ascending or descending chunk order.
pub(crate) fn for_each_chunk<F>(
    family: &WeightFamily,
    t: f64,
    range: (i64, i64),
    pad: (i64, i64),
    descending: bool,
    body: F,
) where
    F: FnMut(&Lattice, i64, i64),
{
    for_each_chunk_in::<f64, F>(family, t, range, pad, descending, body).expect("f64 weights are always available")
}

/// As [`for_each_chunk`] in precision `R`; `None` if `R` is unavailable for
/// the family (checked before any chunk is visited).
pub(crate) fn for_each_chunk_in<R: Real, F>(
    family: &WeightFamily,
    t: f64,
    (lo, hi): (i64, i64),
    (pad_lo, pad_hi): (i64, i64),
    descending: bool,
    mut body: F,
) -> Option<()>
where
    F: FnMut(&Lattice<R>, i64, i64),
{
    R::weight_data(family, t, lo)?;
    let mut parts = chunks(lo, hi);
    if descending {
        parts.reverse();
    }
    for (a, b) in parts {
        let lat = Lattice::<R>::try_new(family, t, a - pad_lo, b + pad_hi)?;
        body(&lat, a, b);
    }
    Some(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chunks_cover_range() {
        let parts = chunks(-5, 3 * CHUNK);
        assert_eq!(parts.first().unwrap().0, -5);
        assert_eq!(parts.last().unwrap().1, 3 * CHUNK);
        for w in parts.windows(2) {
            assert_eq!(w[0].1 + 1, w[1].0);
        }
        assert!(chunks(3, 2).is_empty());
    }

    #[test]
    fn products() {
        let fam = WeightFamily::unilateral_example();
        let lat = Lattice::new(&fam, 0.5, -1, 10);
        assert_eq!(lat.w(-1), 0.0);
        assert_eq!(lat.run_product(2, 0), 1.0);
        let p = lat.w(2) * lat.w(3) * lat.w(4);
        assert_eq!(lat.run_product(2, 3), p);
    }
}
