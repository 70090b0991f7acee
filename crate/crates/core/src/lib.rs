//! Numerical toolkit for Stein-type distributional transforms.
//!
//! Distributions live on finite grids ([`dist`]). On top of them sit the
//! zero-bias and size-bias transforms ([`transforms`]), stochastic order
//! checks ([`orders`]), closed-form tail bounds ([`bounds`]), theorem
//! certificates ([`verifiers`]) and Monte Carlo harnesses ([`montecarlo`]).

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod dist;
pub mod error;
pub mod exec;
pub mod montecarlo;
pub mod orders;
pub mod quad;
pub mod transforms;
pub mod verifiers;

pub use dist::{build_distribution, DistSpec, Distribution, JointDistribution, Kind};
pub use error::{Result, SteinError};
pub use exec::Exec;
