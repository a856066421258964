//! Elements of the generating subspace: finite band sums
//! `sum_n U^n f_n + diag + sum_n g_n (U^*)^n`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::coefficient::{CoefficientFunction, CoefficientSpec};
use crate::error::{Error, Result};
use crate::lattice::for_each_chunk;
use crate::quadrature;
use crate::sum::NeumaierSum;
use crate::weights::{check_t, WeightFamily};
use crate::window::IndexWindow;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    /// `U^n f_n(w_t(k)^2)`: entries `(k+n, k)`.
    F,
    /// `g_n(w_t(k)^2) (U^*)^n`: entries `(k, k+n)`.
    G,
    Diag,
}

/// One band of a band specification.
#[derive(Debug, Clone, PartialEq)]
pub struct BandSpec {
    pub side: Side,
    pub n: usize,
    pub func: CoefficientFunction,
}

impl BandSpec {
    pub fn new(side: Side, n: usize, func: CoefficientFunction) -> Self {
        Self { side, n, func }
    }
}

/// Serializable band (the `element` fragment of run configs).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandEntry {
    pub side: Side,
    pub n: usize,
    #[serde(flatten)]
    pub coefficient: CoefficientSpec,
}

/// Canonical element: the diagonal is stored once, `f_n` and `g_n` for `n >= 1`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LambdaElement {
    f_bands: BTreeMap<usize, CoefficientFunction>,
    g_bands: BTreeMap<usize, CoefficientFunction>,
    diagonal: Option<CoefficientFunction>,
}

/// Band offsets `row - col`: `+n` for `f_n`, `-n` for `g_n`, `0` for the diagonal.
pub type BandIndex = i64;

impl LambdaElement {
    /// The zero element (no bands).
    pub fn zero() -> Self {
        Self::default()
    }

    /// Canonicalizes a band specification. `f_0`, `g_0` and `diag` all name
    /// the diagonal and are summed into it.
    pub fn from_bands(spec: Vec<BandSpec>) -> Result<Self> {
        if spec.is_empty() {
            return Err(Error::InvalidParameter("empty band specification".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        let mut out = Self::zero();
        for band in spec {
            let side = if band.n == 0 { Side::Diag } else { band.side };
            if side == Side::Diag && band.side == Side::Diag && band.n != 0 {
                return Err(Error::InvalidParameter(format!("diagonal band with n = {}", band.n)));
            }
            if !seen.insert((band.side, band.n)) {
                return Err(Error::InvalidParameter(format!("duplicate band {:?} n = {}", band.side, band.n)));
            }
            match side {
                Side::Diag => {
                    out.diagonal = Some(match out.diagonal.take() {
                        Some(d) => d.add(&band.func),
                        None => band.func,
                    });
                }
                Side::F => {
                    out.f_bands.insert(band.n, band.func);
                }
                Side::G => {
                    out.g_bands.insert(band.n, band.func);
                }
            }
        }
        Ok(out)
    }

    pub fn from_entries(entries: &[BandEntry]) -> Result<Self> {
        let spec = entries
            .iter()
            .map(|e| Ok(BandSpec::new(e.side, e.n, e.coefficient.build()?)))
            .collect::<Result<Vec<_>>>()?;
        Self::from_bands(spec)
    }

    /// The coordinate elements `1`, `z` (= `U_{w_t}`) and `zbar` (= `U_{w_t}^*`).
    pub fn coordinate(name: &str) -> Result<Self> {
        let sqrt_s = || CoefficientFunction::sqrt_poly(&[1.0]).expect("nonempty");
        let band = match name {
            "one" | "1" => BandSpec::new(Side::Diag, 0, CoefficientFunction::constant(1.0)),
            "z" => BandSpec::new(Side::F, 1, sqrt_s()),
            "zbar" => BandSpec::new(Side::G, 1, sqrt_s()),
            other => return Err(Error::InvalidParameter(format!("unknown coordinate `{other}`"))),
        };
        Self::from_bands(vec![band])
    }

    /// Canonical band list; `from_bands(to_bands())` reproduces the element.
    pub fn to_bands(&self) -> Vec<BandSpec> {
        let mut out = Vec::new();
        if let Some(d) = &self.diagonal {
            out.push(BandSpec::new(Side::Diag, 0, d.clone()));
        }
        out.extend(self.f_bands.iter().map(|(&n, c)| BandSpec::new(Side::F, n, c.clone())));
        out.extend(self.g_bands.iter().map(|(&n, c)| BandSpec::new(Side::G, n, c.clone())));
        out
    }

    /// Serializable form, when every coefficient is a (sqrt-)polynomial.
    pub fn to_entries(&self) -> Option<Vec<BandEntry>> {
        self.to_bands()
            .into_iter()
            .map(|b| Some(BandEntry { side: b.side, n: b.n, coefficient: b.func.to_spec()? }))
            .collect()
    }

    pub(crate) fn insert(&mut self, band: BandIndex, func: CoefficientFunction) {
        if func.is_zero() {
            return;
        }
        match band {
            0 => self.diagonal = Some(func),
            b if b > 0 => {
                self.f_bands.insert(b as usize, func);
            }
            b => {
                self.g_bands.insert((-b) as usize, func);
            }
        }
    }

    /// Top band index `N`.
    pub fn top_band(&self) -> usize {
        let f = self.f_bands.keys().next_back().copied().unwrap_or(0);
        let g = self.g_bands.keys().next_back().copied().unwrap_or(0);
        f.max(g)
    }

    pub fn is_zero(&self) -> bool {
        self.diagonal.is_none() && self.f_bands.is_empty() && self.g_bands.is_empty()
    }

    pub fn diagonal(&self) -> Option<&CoefficientFunction> {
        self.diagonal.as_ref()
    }

    pub fn f_band(&self, n: usize) -> Option<&CoefficientFunction> {
        if n == 0 {
            self.diagonal.as_ref()
        } else {
            self.f_bands.get(&n)
        }
    }

    pub fn g_band(&self, n: usize) -> Option<&CoefficientFunction> {
        if n == 0 {
            self.diagonal.as_ref()
        } else {
            self.g_bands.get(&n)
        }
    }

    /// All bands as `(offset, coefficient)`, ascending offset.
    pub fn bands(&self) -> Vec<(BandIndex, &CoefficientFunction)> {
        let mut out: Vec<(BandIndex, &CoefficientFunction)> =
            self.g_bands.iter().rev().map(|(&n, c)| (-(n as i64), c)).collect();
        if let Some(d) = &self.diagonal {
            out.push((0, d));
        }
        out.extend(self.f_bands.iter().map(|(&n, c)| (n as i64, c)));
        out
    }

    /// The element restricted to one band.
    pub fn single_band(&self, band: BandIndex) -> Self {
        let mut out = Self::zero();
        if let Some((_, c)) = self.bands().into_iter().find(|(b, _)| *b == band) {
            out.insert(band, c.clone());
        }
        out
    }

    /// `L^2` norm of the classical symbol with measure `d(r^2) (dphi / 2pi)`:
    /// the root of the summed `int |c_n(s)|^2 ds` over `[w_-^2, w_+^2]`.
    pub fn classical_norm(&self, family: &WeightFamily) -> Result<f64> {
        Ok(self.classical_norm_sq(family)?.sqrt())
    }

    pub fn classical_norm_sq(&self, family: &WeightFamily) -> Result<f64> {
        let (lo, hi) = family.s_interval();
        let mut total = 0.0;
        for (_, c) in self.bands() {
            total += quadrature::integrate(
                |s| {
                    let v = c.eval_unchecked(s);
                    v * v
                },
                lo,
                hi,
                quadrature::DEFAULT_TOL,
            )?;
        }
        Ok(total)
    }

    /// `||x_t||^2` from the banded double sum, summed directly from the
    /// coefficient functions without materializing the matrix:
    /// `sum_n sum_k S_t(k)^{1/2} S_t(k+n)^{1/2} |c_n(w_t(k)^2)|^2`.
    ///
    /// Summation order is ascending index within each band, bands in
    /// ascending offset; [`crate::band::quantum_norm`] uses the same order.
    pub fn quantum_norm_sq(&self, family: &WeightFamily, t: f64, window: &IndexWindow) -> Result<f64> {
        check_t(t)?;
        window.validate(family)?;
        let bands = self.bands();
        let top = self.top_band() as i64;
        let mut per_band = vec![NeumaierSum::default(); bands.len()];
        let mut failure = None;
        for_each_chunk(family, t, (window.k_lo, window.k_hi), (0, top), false, |lat, a, b| {
            for ((band, c), acc) in bands.iter().zip(per_band.iter_mut()) {
                let off = band.abs();
                match c.as_series() {
                    Some(series) => {
                        for k in a..=b {
                            let v = series.eval(lat.w2(k));
                            acc.add(lat.rs(k) * lat.rs(k + off) * v * v);
                        }
                    }
                    None => {
                        let s: Vec<f64> = (a..=b).map(|k| lat.w2(k)).collect();
                        match c.sample_increasing(&s) {
                            Ok(vals) => {
                                for (k, v) in (a..=b).zip(vals) {
                                    acc.add(lat.rs(k) * lat.rs(k + off) * v * v);
                                }
                            }
                            Err(e) => failure = Some(e),
                        }
                    }
                }
            }
        });
        if let Some(e) = failure {
            return Err(e);
        }
        Ok(per_band.iter().map(NeumaierSum::value).sum())
    }

    pub fn quantum_norm(&self, family: &WeightFamily, t: f64, window: &IndexWindow) -> Result<f64> {
        Ok(self.quantum_norm_sq(family, t, window)?.sqrt())
    }

    /// Largest `|c_n(s)|` on a uniform grid of `[w_-^2, w_+^2]`; used to scale
    /// tail tolerances into norm-error bounds.
    pub fn sup_estimate(&self, family: &WeightFamily, points: usize) -> f64 {
        let (lo, hi) = family.s_interval();
        let mut sup = 0.0f64;
        for (_, c) in self.bands() {
            for j in 0..=points {
                let s = lo + (hi - lo) * j as f64 / points as f64;
                sup = sup.max(c.eval_unchecked(s).abs());
            }
        }
        sup
    }
}
