//! Small dense networks, Adam, and the squashed-Gaussian policy head.

mod adam;
pub mod checkpoint;
mod net;
mod squash;
mod tensor;

pub use adam::{adam_step, AdamState};
pub use net::{Activation, DenseNet, ForwardCache, Gradients};
pub use squash::{
    log_one_minus_tanh_sq, SampleGrads, SquashedGaussianHead, SquashedSample, LOG_STD_MAX,
    LOG_STD_MIN,
};
pub use tensor::Tensor;
