//! Numeric layer: graph charts of `M`, shell-stratified Monte Carlo
//! integration of kernels against test forms, scaling and Hölder probes,
//! and the homotopy-formula check.

mod numeric;
mod ops;
mod patch;
mod plan;
mod testform;

pub use numeric::{kernel_constant, CompiledForm};
pub use ops::{
    apply_operator, fit_slope, holder_probe, homotopy_check, scaling_probe, HomotopyReport, HomotopyRow, Integrator,
    OperatorValue, ProbeReport, ProbeRow,
};
pub use patch::{Carry, Embedded, Patch};
pub use plan::{ball_volume, estimate, Estimate, SamplePlan, Stratum, REDUCTION_SCHEME};
pub use testform::{dbar_b_numeric, subsets, tangential, tangential_value, Bump, Dbar, TestForm, ZetaForm};

use crate::form::BarrierId;
use crate::kernels::KernelError;

#[derive(Debug, Clone, thiserror::Error)]
pub enum QuadratureError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("chart point {0:?} is outside the patch")]
    OutsidePatch(Vec<f64>),
    #[error("graph equations not solved: residual {residual:e}")]
    NotOnManifold { residual: f64 },
    #[error("graph coordinates are singular here")]
    SingularGraph,
    #[error("barrier {barrier} vanishes at a sample point")]
    Singular { barrier: BarrierId },
    #[error("support: {0}")]
    Support(String),
    #[error("bad sample plan: {0}")]
    BadPlan(String),
    #[error("standard error {stderr:e} above tolerance {tol:e}")]
    Tolerance { stderr: f64, tol: f64 },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}
