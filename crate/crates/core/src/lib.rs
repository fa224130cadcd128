//! Safe control of second-order systems `ẋ₁ = x₂, ẋ₂ = f(x) + g(x)u` with
//! unknown `f` and `g`, learned online as interval enclosures.

// `!(x > 0.0)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod barrier;
pub mod cli;
pub mod controller;
pub mod interval;
pub mod overapprox;
pub mod scenario;
pub mod sim;
