//! Uncertainty propagation through linear ODEs with random parameters using
//! chaos expansions on data-driven bases.
//!
//! The maximum-entropy basis ([`maxent`]) and the arbitrary-polynomial-chaos
//! baseline ([`apc`]) are both built from samples held in an
//! [`EmpiricalMeasure`]. A [`surrogate::Surrogate`] is the deterministic
//! coefficient system obtained by Galerkin projection; integrating it and
//! pushing the coefficients through the basis statistics yields moment
//! trajectories. [`experiments`] wires everything into reproducible studies.
//!
//! All numerical code is generic over [`Real`] (`f32`/`f64`); the aliases
//! below fix the common double-precision instantiations.

// Negated comparisons are used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod apc;
pub mod approx;
pub mod basis;
pub mod error;
pub mod experiments;
pub mod maxent;
pub mod measure;
pub mod scalar;
pub mod surrogate;

pub use basis::{Basis, BasisKind};
pub use error::{Result, UqError};
pub use measure::{BasisStats, EmpiricalMeasure, SampleGenerator};
pub use scalar::Real;

pub type NodeSet64 = maxent::NodeSet<f64>;
pub type MaxentBasis64 = maxent::MaxentBasis<f64>;
pub type PolyBasis64 = apc::PolyBasis<f64>;
pub type EmpiricalMeasure64 = measure::EmpiricalMeasure<f64>;
pub type Surrogate64 = surrogate::Surrogate<f64>;
pub type MomentSeries64 = surrogate::MomentSeries<f64>;

pub type NodeSet32 = maxent::NodeSet<f32>;
pub type MaxentBasis32 = maxent::MaxentBasis<f32>;
pub type EmpiricalMeasure32 = measure::EmpiricalMeasure<f32>;
