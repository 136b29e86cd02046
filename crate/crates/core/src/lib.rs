//! Associative memory in spin glasses.

pub mod cavity;
pub mod dynamics;
pub mod error;
pub mod hopfield;
pub mod ode;
pub mod pipeline;
pub mod rng;
pub mod semiclassical;
pub mod sk;
pub mod spin;

pub use dynamics::{Dynamics, DynamicsKind, Scoring, TieBreak};
pub use error::{Error, Result};
pub use rng::RandomSource;
pub use spin::{CouplingMatrix, SpinConfig, SpinKey};
