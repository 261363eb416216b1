//! Minimal dense numeric kernel: `f64` tensors, a reverse-mode tape, named
//! parameters with Adam, and a finite-difference gradient checker.

mod error;
pub mod gradcheck;
mod params;
mod tape;
mod tensor;

pub use error::{Result, TensorError};
pub use params::{AdamConfig, ParamStore, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use tape::{bce_value, softmax_rows, Gradients, Tape, Var, BCE_EPS};
pub use tensor::{sigmoid, Tensor};
