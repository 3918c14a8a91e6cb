//! Numerical pseudo-differential calculus on a periodic phase-space grid.

pub mod boltzmann;
pub mod cli;
pub mod config;
pub mod dissipation;
pub mod error;
pub mod grid;
pub mod quadrature;
pub mod quantize;
pub mod semigroup;
pub mod sobolev;
pub mod symbol;

pub use error::{Error, Result};
pub use grid::{forward_transform, inner_product, inverse_transform, GridFunction, PhaseGrid};
pub use quantize::{standard_quantize, weyl_quantize, LinearOperator, Provenance};
pub use symbol::{Builtin, Symbol, WeightFunction};
