//! Minimal CPU neural-network layers with hand-written backward passes.
//!
//! Layers expose `forward` (`&self`, inference, safe to share) and
//! `forward_train` / `backward` pairs that cache activations for one
//! backward call. Gradients accumulate into [`Param::grad`] until an
//! optimizer step clears them.

mod conv;
mod layers;
mod optim;
mod param;
mod seq;
mod tensor;

pub use conv::{conv_out, Conv2d, ConvTranspose2d};
pub use layers::{sigmoid, Act, Activation, BatchNorm2d, Dropout, Linear, MaxPool2};
pub use optim::{Adam, Sgd};
pub use param::{Module, Param};
pub use seq::{Layer, Seq};
pub use tensor::{add_assign, concat_channels, split_channels, Tensor};

#[cfg(test)]
mod tests;
