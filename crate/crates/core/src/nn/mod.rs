//! Minimal neural substrate: tensors, the primitive forward/backward set and
//! the Adam optimizer. Primitives are per-sample pure functions; the model
//! layer maps them over batches (batch normalization being the exception,
//! which consumes the whole batch).

pub mod adam;
pub mod batchnorm;
pub mod gru;
pub mod init;
pub mod ops;
mod tensor;

pub use adam::{Adam, AdamConfig};
pub use tensor::Tensor;
