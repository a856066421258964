//! Numerical toolkit for the quantum disk and annulus: weighted-shift
//! coordinates, the balanced d-bar operator `D_t`, its closed-form parametrix
//! `Q_t`, the weighted Hilbert-space norms, and the classical-limit
//! experiments built on them.

// `!(x > 0.0)` is the NaN-rejecting form of the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod band;
pub mod coefficient;
pub mod dd;
pub mod element;
pub mod error;
pub(crate) mod lattice;
pub mod limits;
pub mod operators;
pub mod quadrature;
pub mod sum;
pub mod weights;
pub mod window;

pub use error::{Error, Result};

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
