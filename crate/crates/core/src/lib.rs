//! Zero-range process in a quenched Sinai-type environment.
//!
//! The crate covers the random environment, an exact event-driven simulator,
//! the invariant measures and their block dynamics, a finite-volume solver for
//! the limiting quasilinear equation, Sinai/Brox single-particle sampling and
//! an experiment harness that ties them together.

pub mod brox;
pub mod environment;
pub mod error;
pub mod field;
pub mod harness;
pub mod invariant_measure;
pub mod pde;
pub mod rng;
pub mod stats;
pub mod zero_range;

pub use error::{Error, Result};
pub use field::DensityField;
