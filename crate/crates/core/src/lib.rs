//! Mechanism design with limited commitment.
//!
//! Solvers are generic over the scalar type (`f32`, `f64` or exact
//! `BigRational`); the aliases below fix `f64` and exact rationals.

pub mod canonical;
pub mod concavify;
pub mod contracts;
pub mod durable_good;
pub mod linalg;
pub mod linprog;
pub mod model;
pub mod scalar;
pub mod screening;

pub use num_rational::BigRational;
pub use scalar::Scalar;

pub type Belief64 = model::Belief<f64>;
pub type PosteriorPolicy64 = model::PosteriorPolicy<f64>;
pub type ScreeningModel64 = model::ScreeningModel<f64>;
pub type ScreeningSolution64 = screening::ScreeningSolution<f64>;
pub type DurableGood64 = durable_good::DurableGood<f64>;
pub type LinearProgram64 = linprog::LinearProgram<f64>;
pub type GeneralMechanism64 = canonical::GeneralMechanism<f64>;
pub type CanonicalMechanism64 = canonical::CanonicalMechanism<f64>;
pub type MenuInstance64 = contracts::MenuInstance<f64>;

pub type BeliefQ = model::Belief<BigRational>;
pub type ScreeningModelQ = model::ScreeningModel<BigRational>;
pub type DurableGoodQ = durable_good::DurableGood<BigRational>;
pub type LinearProgramQ = linprog::LinearProgram<BigRational>;
pub type GeneralMechanismQ = canonical::GeneralMechanism<BigRational>;
