//! Numerical laboratory for one-dimensional Vlasov-Poisson near a
//! Penrose-stable equilibrium: resolvent kernels, the echo-wave cascade,
//! a direct spectral solver and echo / damping diagnostics.
//!
//! The core is generic over the scalar type (`f32` or `f64`); the aliases
//! at the crate root fix it to `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cascade;
pub mod diagnostics;
pub mod equilibrium;
pub mod error;
pub mod field;
pub mod grid;
pub mod kernel;
pub mod quadrature;
pub mod reference;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::{bracket, Cx, Real};

pub type C64 = Cx<f64>;
pub type Equilibrium64 = equilibrium::Equilibrium<f64>;
pub type Equilibrium32 = equilibrium::Equilibrium<f32>;
pub type TimeGrid64 = grid::TimeGrid<f64>;
pub type EtaGrid64 = grid::EtaGrid<f64>;
pub type ResolventKernel64 = kernel::ResolventKernel<f64>;
pub type CascadeState64 = cascade::CascadeState<f64>;
pub type CascadeConfig64 = cascade::CascadeConfig<f64>;
pub type FieldSeries64 = field::FieldSeries<f64>;
pub type SpectralState64 = reference::SpectralState<f64>;
pub type BoundProfile64 = diagnostics::BoundProfile<f64>;
