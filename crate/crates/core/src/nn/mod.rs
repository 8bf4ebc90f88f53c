//! Convolutional network core: layers, residual denoiser, losses, Adam.

mod adam;
mod conv;
mod loss;
mod network;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use conv::{conv2d_backward, conv2d_forward, ConvGrads, ConvLayer};
pub use loss::{l1_loss, mse_loss, LossKind};
pub use network::{
    interpolate, network_backward, network_forward, Arch, NetworkParams, ParamGrads, Tape,
};
