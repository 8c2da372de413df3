//! Effective limits of surface integrals of rapidly oscillating periodic
//! densities `g(y, y/eps)`, the directional averages that bound them, and the
//! homogenized Dirichlet and Neumann problems they lead to.

// NaN-rejecting guards are written as `!(x > 0.0)` on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod averaging;
pub mod error;
pub mod expr;
pub mod field;
pub mod geometry;
pub mod oscillatory;
pub mod pde;
pub mod quadrature;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
