//! Quadrature of the symbols in the decomposition of the linearized collision
//! operator, in two velocity dimensions.

pub mod assemble;
pub mod cancellation;
pub mod carleman;
pub mod lemmas;
pub mod params;
pub mod symbols;

pub use carleman::{Band, CarlemanRule, ComplexEstimate, Estimate};
pub use params::{AngularKernel, CollisionModel, KernelSpec, KineticParams, QuadratureConfig};
