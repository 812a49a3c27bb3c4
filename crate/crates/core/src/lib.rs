//! Multi-element generalized polynomial chaos surrogates and hybrid
//! failure-probability estimation.
//!
//! The pipeline: build a piecewise polynomial surrogate of a limit-state
//! function over `[-1, 1]^d` (by collocation with static refinement, or by
//! Galerkin propagation of an ODE with dynamic refinement), then estimate
//! `P(g < 0)` by Monte Carlo on the surrogate, re-evaluating with the exact
//! model only the samples the surrogate is least sure about.
//!
//! The numerical core is generic over [`Scalar`] (`f32` or `f64`); the
//! benchmark problems are `f64`. Aliases for both precisions live at the root.

// `!(x >= 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimator;
pub mod polybasis;
pub mod problems;
pub mod randomspace;
pub mod refine;
pub mod scalar;
pub mod surrogate;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub use estimator::{Estimate, HybridConfig, HybridOutcome, HybridTrace};
pub use refine::{RefinementConfig, RefinementEvent};

pub type Real = f64;

pub type ElementF64 = randomspace::Element<f64>;
pub type ElementF32 = randomspace::Element<f32>;
pub type DecompositionF64 = randomspace::Decomposition<f64>;
pub type DecompositionF32 = randomspace::Decomposition<f32>;
pub type SampleSetF64 = randomspace::SampleSet<f64>;
pub type SampleSetF32 = randomspace::SampleSet<f32>;
pub type QuadratureRuleF64 = polybasis::QuadratureRule<f64>;
pub type QuadratureRuleF32 = polybasis::QuadratureRule<f32>;
pub type TripleProductTensorF64 = polybasis::TripleProductTensor<f64>;
pub type TripleProductTensorF32 = polybasis::TripleProductTensor<f32>;
pub type GpcExpansionF64 = surrogate::GpcExpansion<f64>;
pub type GpcExpansionF32 = surrogate::GpcExpansion<f32>;
pub type MultiElementSurrogateF64 = surrogate::MultiElementSurrogate<f64>;
pub type MultiElementSurrogateF32 = surrogate::MultiElementSurrogate<f32>;
pub type GalerkinSystemF64 = refine::GalerkinSystem<f64>;
pub type GalerkinSystemF32 = refine::GalerkinSystem<f32>;
