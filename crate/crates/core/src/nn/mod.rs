//! The convolutional autoencoder: layer specification, parameters, and
//! forward/backward passes.

pub mod ops;

mod model;
mod params;
mod spec;

pub use model::{
    classify, decode, encode, forward, loss_and_grad, Codec, LatentCode, LatentHook, StepInput, StepLoss,
};
pub use params::{init_bound, Parameters, Tensor};
pub use spec::{default_spec, Activation, AutoencoderSpec, LayerKind, LayerSpec, IMAGE_SHAPE};
