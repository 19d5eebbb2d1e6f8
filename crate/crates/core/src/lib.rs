//! Computation and analysis of the perturbed Hofstadter recursion
//!
//! ```text
//! Q(n) = Q(n - Q(n-1)) + Q(n - Q(n-2)) + (-1)^n
//! ```
//!
//! [`engine`] generates a [`Trace`] from a seed. Every analysis reads that
//! trace: [`diagnostics`] covers the derived series (fluctuations, clocks,
//! renormalization, dyadic profiles), [`frequency`] covers value
//! multiplicities and the dyadic block law, and [`seedlab`] covers
//! classification of seeds.

pub mod diagnostics;
pub mod engine;
pub mod frequency;
pub mod seedlab;
pub mod store;

pub use engine::{extend, run, BadIndex, EngineError, Outcome, Perturbation, RecursionConfig, Seed, Trace, ValueWidth};
