//! Randomness certification from quantum steering and Bell correlations.
//!
//! The crate builds assemblages and behaviors from states and measurements,
//! bounds an eavesdropper's guessing probability with semidefinite programs
//! ([`randomness`], [`npa`]), quantifies steering ([`steering`]), analyses
//! measurement compatibility ([`compat`]) and works with chain Bell
//! inequalities, including an exact decomposition of partially deterministic
//! no-signaling behaviors ([`chain`]).
//!
//! Linear-algebra types are generic over an `nalgebra::RealField`; behaviors
//! and the chain machinery are generic over [`scalar::Real`], which includes
//! exact rationals. The aliases below fix the usual concrete choices.

use openblas_src as _;

pub mod chain;
pub mod compat;
pub mod conic;
pub mod error;
pub mod io;
pub mod npa;
pub mod qmath;
pub mod random;
pub mod randomness;
pub mod scalar;
pub mod scenario;
pub mod steering;

pub use error::{Error, Result};
pub use scalar::Real;

/// Exact rational scalar for the chain machinery.
pub type Rational = num_rational::BigRational;

pub type Behavior64 = scenario::Behavior<f64>;
pub type Behavior32 = scenario::Behavior<f32>;
pub type BehaviorQ = scenario::Behavior<Rational>;

pub type Assemblage64 = scenario::Assemblage<f64>;
pub type Assemblage32 = scenario::Assemblage<f32>;

pub type Density64 = qmath::DensityMatrix<f64>;
pub type Density32 = qmath::DensityMatrix<f32>;
pub type Povm64 = qmath::Povm<f64>;
pub type Povm32 = qmath::Povm<f32>;

pub type ChainInequality64 = chain::ChainInequality<f64>;
pub type ChainInequalityQ = chain::ChainInequality<Rational>;
