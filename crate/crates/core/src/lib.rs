//! Exact kernel algebra and Monte Carlo probes for the tangential
//! Cauchy–Riemann operator on polynomial q-concave CR models.

pub mod poly;
pub mod rational;
pub mod simplicial;
pub mod form;
pub mod par;
pub mod linalg;
pub mod modular;
pub mod ini;
pub mod sampling;
pub mod barrier;
pub mod kernels;
pub mod quadrature;
