//! `D_t`, its parametrix `Q_t`, their classical counterparts and the norm
//! bounds for the kernels of `Q_t`.

pub mod classical;
pub mod dt;
pub mod kernel;
pub mod qt;
pub mod residual;

pub use classical::{apply_d0, tilde_element};
pub use dt::{apply_dt, dt_residual_sup};
pub use kernel::{
    analytic_cap, dense_normalized_kernel, element_schur_bound, kernel_cap, operator_norm_estimate, schur_young_bound,
    KernelOperatorSpec, NormEstimate, SchurBound,
};
pub use qt::{apply_qt, qt_distance_sq, Kernel, QtKernelMode, QtPath, MAX_KERNEL_BAND};
pub use residual::{inverse_residual_streamed, inverse_residual_with, Precision, Residual};
