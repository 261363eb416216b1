//! Inter-object functional relationship learning on synthetic desk-scale scenes.

pub mod adaptation;
pub mod belief;
pub mod env;
pub mod error;
pub mod eval;
pub mod generator;
pub mod nets;
pub mod registry;
pub mod rng;
pub mod scene;
pub mod trainer;

pub use belief::BeliefMatrix;
pub use error::{IfrError, Result};
