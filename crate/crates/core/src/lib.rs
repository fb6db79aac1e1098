//! Goodness-of-fit tests for stochastic process models built on marked
//! empirical processes, together with Monte Carlo samplers of their
//! Brownian limit laws and a reproducible experiment harness.
//!
//! Two tests ship:
//!
//! * a Cramer-von Mises type test for the drift of a diffusion observed
//!   on a high-frequency grid ([`diffusion_gof`]), calibrated against the
//!   law of the integral of squared Brownian motion, and
//! * an Anderson-Darling type sign test for nonlinear Markov time series
//!   ([`ts_gof`]), calibrated against the law of the integral of
//!   B(u)^2/u, whose mean is one.
//!
//! The numeric kernels (step functions, quadrature, Brownian functionals,
//! Euler stepping, tabulated laws) are generic over the scalar type via
//! [`scalar::Real`]; the statistical layer works at `f64`. The aliases
//! below fix the common concrete choices.

pub mod decision;
pub mod error;
pub mod gauss;
pub mod harness;
pub mod l2core;
pub mod limitlaws;
pub mod rng;
pub mod scalar;
pub mod sde;
pub mod ts_gof;

pub mod diffusion_gof;

pub use decision::{TestMetadata, TestResult};
pub use error::{Error, Result};
pub use scalar::Real;

/// Default concrete scalar of the statistical layer.
pub type Scalar = f64;

/// Concrete aliases of the generic kernels at the default scalar.
pub type MarkedSample = l2core::MarkedSample<Scalar>;
pub type StepFunction = l2core::StepFunction<Scalar>;
pub type QuadratureMeasure = l2core::QuadratureMeasure<Scalar>;
pub type WeightFunction = l2core::WeightFunction<Scalar>;
pub type BmPath = limitlaws::BmPath<Scalar>;
pub type DiffusionModel = sde::DiffusionModel<Scalar>;
pub type SamplingScheme = sde::SamplingScheme<Scalar>;
pub type DiscreteSample = sde::DiscreteSample<Scalar>;
pub type InvariantLaw = sde::InvariantLaw<Scalar>;
pub type PsiFunction = sde::PsiFunction<Scalar>;

/// Single-precision aliases; the kernels behave identically up to
/// rounding.
pub type MarkedSample32 = l2core::MarkedSample<f32>;
pub type StepFunction32 = l2core::StepFunction<f32>;
pub type BmPath32 = limitlaws::BmPath<f32>;
