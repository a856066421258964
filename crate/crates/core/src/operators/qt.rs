//! The parametrix `Q_t`: band-wise one-sided kernel sums.
//!
//! Each output band is produced by one kernel acting on one input band:
//!
//! * `T1(n)`, `n >= 0`: input `f_{n+1}` (offset `n+1`) to output offset `n`,
//!   `F(k) = -sum_{i >= k} K1(k, i) f_{n+1}(w_t(i)^2)`;
//! * `T2(n)`, `n >= 1`: input `g_{n-1}` (offset `-(n-1)`, the diagonal for
//!   `n = 1`) to output offset `-n`, `G(k) = sum_{i <= k} K2(k, i) g_{n-1}(w_t(i)^2)`.
//!
//! Every kernel factors as `A(k) B(i)`, so the fast path is one prefix or
//! suffix scan per band.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::band::BandMatrix;
use crate::coefficient::CoefficientFunction;
use crate::dd::Real;
use crate::element::LambdaElement;
use crate::error::{Error, Result};
use crate::lattice::Lattice;
use crate::sum::NeumaierSum;
use crate::weights::{check_t, WeightFamily};
use crate::window::IndexWindow;

/// Longest weight product a kernel may form; bounds the top band of inputs.
pub const MAX_KERNEL_BAND: usize = 16;

/// Which `f`-side kernel to use. `T2` kernels are the same in both modes.
///
/// `Corrected`: `K1(k, i) = w(k)..w(k+n-1) / (w(i)..w(i+n))`, weight
/// denominator at the summation index; this is the exact right inverse of
/// `D_t`. `Printed`: `K1(k, i) = w(k+1)..w(k+n) / (w(i+1)..w(i+n)) / w(k+n)`.
/// Both carry the factor `S_t(i)^{1/2} S_t(i+n+1)^{1/2}`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QtKernelMode {
    #[default]
    Corrected,
    Printed,
}

impl QtKernelMode {
    pub fn name(self) -> &'static str {
        match self {
            Self::Corrected => "corrected",
            Self::Printed => "printed",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QtPath {
    /// One prefix/suffix scan per band, `O(K)`.
    Fast,
    /// The double sum entry by entry, `O(K^2)`.
    Brute,
}

/// The kernel families of `Q_t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "n", rename_all = "snake_case")]
pub enum Kernel {
    /// `f`-side, `l^2_{n+1} -> l^2_n`, suffix sums.
    T1(usize),
    /// `g`-side, `l^2_{n-1} -> l^2_n`, prefix sums.
    T2(usize),
}

impl Kernel {
    pub fn n(self) -> usize {
        match self {
            Self::T1(n) | Self::T2(n) => n,
        }
    }

    /// Offset of the band the kernel reads.
    pub fn input_offset(self) -> i64 {
        match self {
            Self::T1(n) => n as i64 + 1,
            Self::T2(n) => -(n as i64 - 1),
        }
    }

    /// Offset of the band the kernel writes.
    pub fn output_offset(self) -> i64 {
        match self {
            Self::T1(n) => n as i64,
            Self::T2(n) => -(n as i64),
        }
    }

    /// Weighted-space indices `(m_in, m_out)`.
    pub fn spaces(self) -> (usize, usize) {
        match self {
            Self::T1(n) => (n + 1, n),
            Self::T2(n) => (n - 1, n),
        }
    }

    /// The kernel reading input band `offset`.
    pub fn for_input(offset: i64) -> Self {
        if offset > 0 {
            Self::T1(offset as usize - 1)
        } else {
            Self::T2((1 - offset) as usize)
        }
    }

    fn sign(self) -> f64 {
        match self {
            Self::T1(_) => -1.0,
            Self::T2(_) => 1.0,
        }
    }

    fn descending(self) -> bool {
        matches!(self, Self::T1(_))
    }

    /// Lattice padding above a chunk.
    pub(crate) fn pad_hi(self) -> i64 {
        self.n() as i64 + 2
    }

    /// `A(k)`.
    #[inline]
    pub(crate) fn left<R: Real>(self, mode: QtKernelMode, lat: &Lattice<R>, k: i64) -> R {
        let one = R::from_f64(1.0);
        match (self, mode) {
            (Self::T1(n), QtKernelMode::Corrected) => lat.run_product(k, n),
            (Self::T1(n), QtKernelMode::Printed) => lat.run_product(k + 1, n) / lat.w(k + n as i64),
            (Self::T2(n), _) => one / lat.run_product(k, n),
        }
    }

    /// `B(i)`.
    #[inline]
    pub(crate) fn right<R: Real>(self, mode: QtKernelMode, lat: &Lattice<R>, i: i64) -> R {
        match (self, mode) {
            (Self::T1(n), QtKernelMode::Corrected) => {
                let n = n as i64;
                lat.rs(i) * lat.rs(i + n + 1) / (lat.run_product(i, n as usize) * lat.w(i + n))
            }
            (Self::T1(n), QtKernelMode::Printed) => lat.rs(i) * lat.rs(i + n as i64 + 1) / lat.run_product(i + 1, n),
            (Self::T2(n), _) => {
                let m = n as i64 - 1;
                lat.run_product(i, n) * lat.rs(i) * lat.rs(i + m) / lat.w(i + m)
            }
        }
    }

    /// `K(k, i)` evaluated as written, with fresh products; the brute path
    /// and the dense oracles use this.
    pub(crate) fn literal(self, mode: QtKernelMode, lat: &Lattice, k: i64, i: i64) -> f64 {
        let prod = |a: i64, b: i64| (a..=b).map(|j| lat.w(j)).product::<f64>();
        match (self, mode) {
            (Self::T1(n), QtKernelMode::Corrected) => {
                let n = n as i64;
                prod(k, k + n - 1) / prod(i, i + n) * lat.rs(i) * lat.rs(i + n + 1)
            }
            (Self::T1(n), QtKernelMode::Printed) => {
                let n = n as i64;
                prod(k + 1, k + n) / prod(i + 1, i + n) * lat.rs(i) * lat.rs(i + n + 1) / lat.w(k + n)
            }
            (Self::T2(n), _) => {
                let n = n as i64;
                prod(i, i + n - 1) / prod(k, k + n - 1) * lat.rs(i) * lat.rs(i + n - 1) / lat.w(i + n - 1)
            }
        }
    }

    /// Whether `K(k, i)` can be nonzero.
    #[inline]
    pub(crate) fn supports(self, k: i64, i: i64) -> bool {
        match self {
            Self::T1(_) => i >= k,
            Self::T2(_) => i <= k,
        }
    }
}

/// The kernels `Q_t` applies to `elem`, with the bands they read.
pub fn kernels_of(elem: &LambdaElement) -> Vec<(Kernel, &CoefficientFunction)> {
    elem.bands().into_iter().map(|(offset, c)| (Kernel::for_input(offset), c)).collect()
}

fn check_top_band(elem: &LambdaElement) -> Result<()> {
    let top = elem.top_band();
    if top > MAX_KERNEL_BAND {
        return Err(Error::KernelTooLong { n: top, cap: MAX_KERNEL_BAND });
    }
    Ok(())
}

/// Walks `kernel` over the window in scan order (descending for `T1`),
/// calling `emit(k, value, lattice)` with the output entry at base `k`.
/// Memory is one chunk of lattice regardless of the window length.
pub(crate) fn scan_kernel<F>(
    kernel: Kernel,
    mode: QtKernelMode,
    family: &WeightFamily,
    t: f64,
    window: &IndexWindow,
    input: &CoefficientFunction,
    emit: F,
) -> Result<()>
where
    F: FnMut(i64, f64, &Lattice) -> Result<()>,
{
    let mut sampler = input.sampler();
    scan_kernel_in::<f64, _, _>(kernel, mode, family, t, window, |s| sampler.value_at(s), emit)
        .expect("f64 weights are always available")
}

/// [`scan_kernel`] in precision `R`, with the input band supplied by `input`
/// (called with `w_t(i)^2` in scan order). The lattice handed to `emit`
/// also covers `k - 1`. `None` if the family is unavailable in `R`.
pub(crate) fn scan_kernel_in<R, E, F>(
    kernel: Kernel,
    mode: QtKernelMode,
    family: &WeightFamily,
    t: f64,
    window: &IndexWindow,
    mut input: E,
    mut emit: F,
) -> Option<Result<()>>
where
    R: Real,
    E: FnMut(R) -> Result<R>,
    F: FnMut(i64, R, &Lattice<R>) -> Result<()>,
{
    let mut acc = R::Sum::default();
    let mut failure = None;
    let sign = R::from_f64(kernel.sign());
    let descending = kernel.descending();
    let walked = crate::lattice::for_each_chunk_in::<R, _>(
        family,
        t,
        (window.k_lo, window.k_hi),
        (1, kernel.pad_hi()),
        descending,
        |lat, a, b| {
            if failure.is_some() {
                return;
            }
            let mut step = |k: i64| -> Result<()> {
                let x = input(lat.w2(k))?;
                R::accumulate(&mut acc, kernel.right(mode, lat, k) * x);
                emit(k, sign * kernel.left(mode, lat, k) * R::total(&acc), lat)
            };
            let outcome =
                if descending { (a..=b).rev().try_for_each(&mut step) } else { (a..=b).try_for_each(&mut step) };
            if let Err(e) = outcome {
                failure = Some(e);
            }
        },
    );
    walked.map(|()| failure.map_or(Ok(()), Err))
}

fn fast_band(
    kernel: Kernel,
    mode: QtKernelMode,
    family: &WeightFamily,
    t: f64,
    window: &IndexWindow,
    input: &CoefficientFunction,
) -> Result<Vec<f64>> {
    let mut out = vec![0.0; window.len() as usize];
    scan_kernel(kernel, mode, family, t, window, input, |k, v, _| {
        out[(k - window.k_lo) as usize] = v;
        Ok(())
    })?;
    Ok(out)
}

fn brute_band(
    kernel: Kernel,
    mode: QtKernelMode,
    lat: &Lattice,
    window: &IndexWindow,
    input: &CoefficientFunction,
) -> Result<Vec<f64>> {
    let x: Vec<f64> = input.sample_increasing(&(window.k_lo..=window.k_hi).map(|i| lat.w2(i)).collect::<Vec<_>>())?;
    let sign = kernel.sign();
    Ok((window.k_lo..=window.k_hi)
        .map(|k| {
            let mut acc = NeumaierSum::default();
            for (i, xi) in (window.k_lo..=window.k_hi).zip(&x) {
                if kernel.supports(k, i) {
                    acc.add(kernel.literal(mode, lat, k, i) * xi);
                }
            }
            sign * acc.value()
        })
        .collect())
}

/// `Q_t x` realized over `window`. The diagonal of `x` is read as `g_0`.
pub fn apply_qt(
    elem: &LambdaElement,
    family: &WeightFamily,
    t: f64,
    window: &IndexWindow,
    mode: QtKernelMode,
    path: QtPath,
) -> Result<BandMatrix> {
    check_t(t)?;
    window.validate(family)?;
    check_top_band(elem)?;
    let kernels = kernels_of(elem);
    let lat = match path {
        QtPath::Brute => Some(Lattice::new(family, t, window.k_lo, window.k_hi + MAX_KERNEL_BAND as i64 + 2)),
        QtPath::Fast => None,
    };
    let bands: Vec<(i64, Vec<f64>)> = kernels
        .par_iter()
        .map(|&(kernel, input)| {
            let values = match &lat {
                None => fast_band(kernel, mode, family, t, window, input)?,
                Some(lat) => brute_band(kernel, mode, lat, window, input)?,
            };
            Ok((kernel.output_offset(), values))
        })
        .collect::<Result<_>>()?;
    let mut out = BandMatrix::new(*window, family.domain());
    for (offset, values) in bands {
        out.insert_band(offset, values)?;
    }
    Ok(out)
}

/// `||Q_t x - y_t||^2` (or `||Q_t x||^2` without `y`), streamed band by band
/// without materializing either matrix. `y` supplies the comparison
/// coefficient on each output band; its transforms are stepped along the
/// scan direction.
pub fn qt_distance_sq(
    elem: &LambdaElement,
    y: Option<&LambdaElement>,
    family: &WeightFamily,
    t: f64,
    window: &IndexWindow,
    mode: QtKernelMode,
) -> Result<f64> {
    check_t(t)?;
    window.validate(family)?;
    check_top_band(elem)?;
    let kernels = kernels_of(elem);
    let mut written = Vec::new();
    let mut total = 0.0;
    // Output bands in ascending offset, the order used by the band norms.
    let mut order: Vec<(Kernel, &CoefficientFunction)> = kernels;
    order.sort_by_key(|(k, _)| k.output_offset());
    for (kernel, input) in order {
        let offset = kernel.output_offset();
        written.push(offset);
        let target = y.and_then(|y| y.bands().into_iter().find(|(b, _)| *b == offset).map(|(_, c)| c.clone()));
        let mut target = target.as_ref().map(|c| c.sampler());
        let off = offset.abs();
        let mut acc = NeumaierSum::default();
        scan_kernel(kernel, mode, family, t, window, input, |k, v, lat| {
            let d = match target.as_mut() {
                Some(s) => v - s.value_at(lat.w2(k))?,
                None => v,
            };
            acc.add(lat.rs(k) * lat.rs(k + off) * d * d);
            Ok(())
        })?;
        total += acc.value();
    }
    // Bands of y that Q_t x does not produce.
    if let Some(y) = y {
        for (offset, _) in y.bands() {
            if !written.contains(&offset) {
                total += y.single_band(offset).quantum_norm_sq(family, t, window)?;
            }
        }
    }
    Ok(total)
}
