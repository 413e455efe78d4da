//! Convexified defining functions, Leray maps and barrier functions for
//! polynomial CR model manifolds, plus the tangential fields used to
//! trade `z`-derivatives for `ζ`-derivatives.

mod leray;
mod model;
mod tangent;

pub use leray::{
    holomorphic_directions, holomorphy_check, leray, leray_fixed, validate_barrier, BarrierReport, LerayDatum,
    LerayOptions,
};
pub use model::{convexify, levi, ModelError, ModelManifold};
pub use tangent::{tangent_fields, TangentField, TangentFieldSet};

use crate::form::FormError;

#[derive(Debug, Clone, thiserror::Error)]
pub enum BarrierError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("rho_hat_{0} is not real-valued")]
    NotReal(usize),
    #[error("d rho_hat_1 ^ ... ^ d rho_hat_k vanishes at the base point")]
    RankDeficient,
    #[error("model is not CR generic at the base point")]
    NotGeneric,
    #[error("q-concavity fails at x = {x:?}: {negatives} negative eigenvalues on the complex tangent space")]
    NotConcave { x: Vec<f64>, negatives: usize },
    #[error("convexity check failed for {direction}: {positives} positive eigenvalues, need {needed} (C too small)")]
    ConvexityFailed { direction: String, positives: usize, needed: usize },
    #[error("direction {0:?} is not in the union of the simplices (need |a|_1 = 1)")]
    BadDirection(Vec<f64>),
    #[error("positive Levi subspace has dimension {d}, need at least {needed}")]
    TooFewPositive { d: usize, needed: usize },
    #[error("alpha search failed: {0}")]
    AlphaSearch(String),
    #[error("barrier inequality violated: slack {slack:e} at zeta = {zeta:?}, z = {z:?}")]
    Violation { slack: f64, zeta: Vec<(f64, f64)>, z: Vec<(f64, f64)> },
    #[error("nonvanishing z-bar derivative along tangent direction {0}")]
    NonHolomorphic(usize),
    #[error("datum invariant failed: {0}")]
    Invariant(String),
    #[error("tangent frame matrix singular: {0}")]
    SingularFrame(String),
    #[error(transparent)]
    Form(#[from] FormError),
}
