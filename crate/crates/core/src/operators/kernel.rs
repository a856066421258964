//! Norm bounds for the kernels of `Q_t` between weighted sequence spaces.
//!
//! `l^2_m` carries the weight `mu_m(k) = S_t(k+m)^{1/2} S_t(k)^{1/2}`. A
//! kernel `K: l^2_p -> l^2_q` is an integral operator with respect to
//! `mu_p`, so its Schur test reads
//! `||K||^2 <= sup_k sum_i |K(k,i)| * sup_i sum_k |K(k,i)| mu_q(k) / mu_p(i)`.

use serde::{Deserialize, Serialize};

use crate::element::LambdaElement;
use crate::error::{Error, Result};
use crate::lattice::Lattice;
use crate::operators::qt::{kernels_of, Kernel, QtKernelMode};
use crate::sum::NeumaierSum;
use crate::weights::{check_t, DomainKind, WeightFamily};
use crate::window::IndexWindow;

/// One kernel of `Q_t` on a window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelOperatorSpec {
    pub kernel: Kernel,
    pub t: f64,
    pub family: WeightFamily,
    pub window: IndexWindow,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchurBound {
    /// `sup_k sum_i |K(k, i)|`.
    pub row_sup: f64,
    /// `sup_i sum_k |K(k, i)| mu_out(k) / mu_in(i)`.
    pub col_sup: f64,
    /// `sqrt(row_sup * col_sup)`, a bound on the operator norm.
    pub bound: f64,
    /// The `t`-independent cap from the integral estimates; infinite when the
    /// kernel admits none.
    pub analytic_cap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormEstimate {
    /// Largest singular value estimate.
    pub value: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Last Rayleigh quotient of `K^* K`.
    pub rayleigh: f64,
}

/// Default power-iteration budget and relative Rayleigh tolerance.
pub const POWER_ITERATIONS: usize = 500;
pub const POWER_TOL: f64 = 1e-10;

/// `t`-independent cap on the norm of every kernel of `Q_t`:
/// `sqrt(2 (1 + C)) (w_+ - w_-)`, `C` the weight-ratio constant.
///
/// Both Schur sums split by AM-GM into sums of `S_t(k)/w_t(k)`, each at most
/// `2 (w_+ - w_-)`; one of them needs a single shift `w(k+1) <= C w(k)`.
pub fn analytic_cap(family: &WeightFamily) -> f64 {
    (2.0 * (1.0 + family.ratio_const())).sqrt() * (family.w_plus() - family.w_minus())
}

/// The cap for one kernel. The printed `T1(0)` kernel divides by `w(k)`
/// rather than `w(i)`, which costs a factor `w_+ / w_-` and is unbounded on
/// the disk.
pub fn kernel_cap(kernel: Kernel, mode: QtKernelMode, family: &WeightFamily) -> f64 {
    let base = analytic_cap(family);
    match (kernel, mode, family.domain()) {
        (Kernel::T1(0), QtKernelMode::Printed, DomainKind::Disk) => f64::INFINITY,
        (Kernel::T1(0), QtKernelMode::Printed, DomainKind::Annulus) => base * family.w_plus() / family.w_minus(),
        _ => base,
    }
}

/// Tabulated `A`, `B` and the weights of both spaces over the window.
struct Factors {
    a: Vec<f64>,
    b: Vec<f64>,
    mu_in: Vec<f64>,
    mu_out: Vec<f64>,
    suffix: bool,
}

impl Factors {
    fn new(spec: &KernelOperatorSpec, mode: QtKernelMode) -> Result<Self> {
        check_t(spec.t)?;
        spec.window.validate(&spec.family)?;
        if let Kernel::T2(0) = spec.kernel {
            return Err(Error::Argument("T2 kernels start at n = 1".into()));
        }
        let w = &spec.window;
        let top = spec.kernel.n() as i64 + 2;
        let lat = Lattice::new(&spec.family, spec.t, w.k_lo, w.k_hi + top);
        let (m_in, m_out) = spec.kernel.spaces();
        let mu = |m: usize, k: i64| lat.rs(k) * lat.rs(k + m as i64);
        let idx = w.k_lo..=w.k_hi;
        Ok(Self {
            a: idx.clone().map(|k| spec.kernel.left(mode, &lat, k)).collect(),
            b: idx.clone().map(|k| spec.kernel.right(mode, &lat, k)).collect(),
            mu_in: idx.clone().map(|k| mu(m_in, k)).collect(),
            mu_out: idx.map(|k| mu(m_out, k)).collect(),
            suffix: matches!(spec.kernel, Kernel::T1(_)),
        })
    }

    fn len(&self) -> usize {
        self.a.len()
    }

    /// `out(k) = A(k) sum_{i in range(k)} B(i) v(i)`.
    fn apply(&self, v: &[f64], out: &mut [f64]) {
        let n = self.len();
        let mut acc = NeumaierSum::default();
        let mut step = |k: usize| {
            acc.add(self.b[k] * v[k]);
            out[k] = self.a[k] * acc.value();
        };
        if self.suffix {
            (0..n).rev().for_each(&mut step);
        } else {
            (0..n).for_each(&mut step);
        }
    }

    /// Transpose: `out(i) = B(i) sum_{k in range^T(i)} A(k) u(k)`.
    fn apply_transpose(&self, u: &[f64], out: &mut [f64]) {
        let n = self.len();
        let mut acc = NeumaierSum::default();
        let mut step = |i: usize| {
            acc.add(self.a[i] * u[i]);
            out[i] = self.b[i] * acc.value();
        };
        if self.suffix {
            (0..n).for_each(&mut step);
        } else {
            (0..n).rev().for_each(&mut step);
        }
    }
}

/// Schur-Young bound from the realized kernel, `O(K)` by prefix/suffix sums,
/// together with the analytic cap.
pub fn schur_young_bound(spec: &KernelOperatorSpec, mode: QtKernelMode) -> Result<SchurBound> {
    let f = Factors::new(spec, mode)?;
    // All factors are nonnegative, so |K| = K.
    let ones = vec![1.0; f.len()];
    let mut rows = vec![0.0; f.len()];
    f.apply(&ones, &mut rows);
    let mut cols = vec![0.0; f.len()];
    f.apply_transpose(&f.mu_out, &mut cols);
    let row_sup = rows.iter().copied().fold(0.0, f64::max);
    let col_sup = cols.iter().zip(&f.mu_in).map(|(c, m)| c / m).fold(0.0, f64::max);
    Ok(SchurBound {
        row_sup,
        col_sup,
        bound: (row_sup * col_sup).sqrt(),
        analytic_cap: kernel_cap(spec.kernel, mode, &spec.family),
    })
}

/// Largest singular value of the kernel between its weighted spaces, by
/// power iteration on `K^* K`. The seed is the constant function 1 of the
/// input space.
pub fn operator_norm_estimate(spec: &KernelOperatorSpec, mode: QtKernelMode, iters: usize) -> Result<NormEstimate> {
    if iters == 0 {
        return Err(Error::Argument("power iteration needs at least one step".into()));
    }
    let f = Factors::new(spec, mode)?;
    let n = f.len();
    // Unitary change to plain l^2: v = mu_in^{1/2} g, u = mu_out^{1/2} h.
    let root_in: Vec<f64> = f.mu_in.iter().map(|m| m.sqrt()).collect();
    let root_out: Vec<f64> = f.mu_out.iter().map(|m| m.sqrt()).collect();
    let mut v = root_in.clone();
    normalize(&mut v);
    let (mut tmp, mut u, mut next) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut rayleigh = 0.0;
    for it in 1..=iters {
        // u = K^ v with K^(k, i) = mu_out(k)^{1/2} K(k, i) mu_in(i)^{-1/2}
        for i in 0..n {
            tmp[i] = v[i] / root_in[i];
        }
        f.apply(&tmp, &mut u);
        for k in 0..n {
            u[k] *= root_out[k];
        }
        // next = K^T u
        for k in 0..n {
            tmp[k] = u[k] * root_out[k];
        }
        f.apply_transpose(&tmp, &mut next);
        for i in 0..n {
            next[i] /= root_in[i];
        }
        let current = dot(&v, &next);
        let norm = normalize(&mut next);
        std::mem::swap(&mut v, &mut next);
        if norm == 0.0 {
            return Ok(NormEstimate { value: 0.0, converged: true, iterations: it, rayleigh: 0.0 });
        }
        let done = (current - rayleigh).abs() <= POWER_TOL * current;
        rayleigh = current;
        if done {
            return Ok(NormEstimate { value: rayleigh.sqrt(), converged: true, iterations: it, rayleigh });
        }
    }
    Ok(NormEstimate { value: rayleigh.sqrt(), converged: false, iterations: iters, rayleigh })
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    let mut acc = NeumaierSum::default();
    for (a, b) in x.iter().zip(y) {
        acc.add(a * b);
    }
    acc.value()
}

fn normalize(x: &mut [f64]) -> f64 {
    let n = dot(x, x).sqrt();
    if n > 0.0 {
        x.iter_mut().for_each(|v| *v /= n);
    }
    n
}

/// Schur bound for `Q_t` restricted to an element: the bands of `Q_t x` are
/// orthogonal and each comes from one kernel, so `||Q_t x|| / ||x||` is at
/// most the largest kernel bound. Zero for the zero element.
pub fn element_schur_bound(
    elem: &LambdaElement,
    family: &WeightFamily,
    t: f64,
    window: &IndexWindow,
    mode: QtKernelMode,
) -> Result<SchurBound> {
    let mut out = SchurBound { row_sup: 0.0, col_sup: 0.0, bound: 0.0, analytic_cap: 0.0 };
    for (kernel, _) in kernels_of(elem) {
        let spec = KernelOperatorSpec { kernel, t, family: *family, window: *window };
        let b = schur_young_bound(&spec, mode)?;
        if b.bound > out.bound {
            out.row_sup = b.row_sup;
            out.col_sup = b.col_sup;
            out.bound = b.bound;
        }
        out.analytic_cap = out.analytic_cap.max(b.analytic_cap);
    }
    Ok(out)
}

/// Dense `K^` (plain `l^2` form) for small windows; rows are output indices.
pub fn dense_normalized_kernel(spec: &KernelOperatorSpec, mode: QtKernelMode) -> Result<Vec<Vec<f64>>> {
    check_t(spec.t)?;
    let w = &spec.window;
    if w.len() > 5000 {
        return Err(Error::Argument(format!("dense kernel of size {} is too large", w.len())));
    }
    let lat = Lattice::new(&spec.family, spec.t, w.k_lo, w.k_hi + spec.kernel.n() as i64 + 2);
    let (m_in, m_out) = spec.kernel.spaces();
    let mu = |m: usize, k: i64| lat.rs(k) * lat.rs(k + m as i64);
    Ok((w.k_lo..=w.k_hi)
        .map(|k| {
            (w.k_lo..=w.k_hi)
                .map(|i| {
                    if spec.kernel.supports(k, i) {
                        mu(m_out, k).sqrt() * spec.kernel.literal(mode, &lat, k, i) / mu(m_in, i).sqrt()
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect())
}
