//! Denoising-autoencoder semantic communication over an AWGN channel.
//!
//! The crate is `no_std` with `alloc`. Enable `std` for runtime SIMD
//! detection in the matrix kernels and `serde` for serializable records.

#![no_std]

extern crate alloc;

pub mod adam;
pub mod channel;
pub mod cifar;
pub mod error;
pub mod loss;
pub mod metrics;
pub mod nn;
pub mod real;
pub mod sampling;
pub mod seed;
pub mod synthetic;
pub mod train;

pub use channel::{corrupt, ChannelConfig, NoiseDraw, Placement};
pub use cifar::{ImageBatch, RawRecord, Split};
pub use error::{Error, Result};
pub use metrics::{mean_psnr_over, psnr, relative_gap, MetricsRecord};
pub use nn::{default_spec, AutoencoderSpec, Codec, Parameters};
pub use real::Real;
pub use sampling::{batch_iter, subset_sample, SubsetSpec};
pub use train::{train, train_sl, train_ssl, LossTrace, Mode, TrainOutcome, TrainingConfig};
