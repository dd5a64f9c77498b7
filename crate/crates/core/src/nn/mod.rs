//! Small dense networks, categorical heads, Adam and checkpoint I/O.

pub mod adam;
pub mod categorical;
pub mod checkpoint;
pub mod mlp;
pub mod tensor;

pub use adam::{Adam, AdamConfig, clip_grad_norm};
pub use categorical::MaskedCategorical;
pub use checkpoint::Checkpoint;
pub use mlp::{Activation, ForwardCache, Init, Mlp};
pub use tensor::TensorBuffer;
