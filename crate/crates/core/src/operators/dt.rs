//! The balanced d-bar operator `D_t a = S_t^{-1/2} [a, U_{w_t}] S_t^{-1/2}`.

use crate::band::{entry_of, BandMatrix};
use crate::element::LambdaElement;
use crate::error::{Error, Result};
use crate::lattice::Lattice;
use crate::weights::{check_t, WeightFamily};

/// `[a, U]_{ij} = a_{i,j+1} w(j) - w(i-1) a_{i-1,j}`, scaled by
/// `S_t(i)^{-1/2} S_t(j)^{-1/2}`.
#[inline]
fn dt_entry(a: &BandMatrix, lat: &Lattice, row: i64, col: i64) -> f64 {
    let commutator = a.get(row, col + 1) * lat.w(col) - lat.w(row - 1) * a.get(row - 1, col);
    commutator / (lat.rs(row) * lat.rs(col))
}

fn lattice_for(a: &BandMatrix, family: &WeightFamily, t: f64) -> Lattice {
    let w = a.window();
    let top = a.offsets().iter().map(|b| b.abs()).max().unwrap_or(0);
    Lattice::new(family, t, w.k_lo - 1, w.k_hi + top + 2)
}

/// `D_t a` on the same window. Band `b` of the result comes from band
/// `b - 1` of `a`. The trusted margin grows by one.
pub fn apply_dt(a: &BandMatrix, family: &WeightFamily, t: f64) -> Result<BandMatrix> {
    check_t(t)?;
    let lat = lattice_for(a, family, t);
    let w = *a.window();
    let mut out = BandMatrix::new(w, a.domain());
    for b in a.offsets() {
        let offset = b + 1;
        let values = (w.k_lo..=w.k_hi)
            .map(|k| {
                let (row, col) = entry_of(k, offset);
                dt_entry(a, &lat, row, col)
            })
            .collect();
        out.insert_band(offset, values)?;
    }
    out.set_valid_margin(a.valid_margin() + 1);
    Ok(out)
}

/// `sup |D_t q - x|` over the base indices `D_t q` trusts, without
/// materializing either side. `x` is sampled at `w_t(k)^2`.
pub fn dt_residual_sup(q: &BandMatrix, x: &LambdaElement, family: &WeightFamily, t: f64) -> Result<f64> {
    check_t(t)?;
    let lat = lattice_for(q, family, t);
    let mut trusted = q.clone_shape();
    trusted.set_valid_margin(q.valid_margin() + 1);
    let (lo, hi) = trusted.trusted_range();
    if lo > hi {
        return Err(Error::Argument("window too short to hold trusted entries".into()));
    }
    let mut offsets: Vec<i64> = q.offsets().iter().map(|b| b + 1).collect();
    offsets.extend(x.bands().iter().map(|(b, _)| *b));
    offsets.sort_unstable();
    offsets.dedup();
    let mut sup = 0.0f64;
    for offset in offsets {
        let from_q = q.band(offset - 1).is_some();
        let target = x.bands().into_iter().find(|(b, _)| *b == offset).map(|(_, c)| c);
        let mut sampler = target.map(|c| c.sampler());
        for k in lo..=hi {
            let (row, col) = entry_of(k, offset);
            let d = if from_q { dt_entry(q, &lat, row, col) } else { 0.0 };
            let xv = match sampler.as_mut() {
                Some(s) => s.value_at(lat.w2(k))?,
                None => 0.0,
            };
            sup = sup.max((d - xv).abs());
        }
    }
    Ok(sup)
}

impl BandMatrix {
    /// Same window, domain and margin, no bands.
    pub(crate) fn clone_shape(&self) -> BandMatrix {
        let mut out = BandMatrix::new(*self.window(), self.domain());
        out.set_valid_margin(self.valid_margin());
        out
    }
}
