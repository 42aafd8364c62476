//! IO, file formats, experiment orchestration and the command line for the
//! `semcomm-core` autoencoder.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod experiments;
mod fsutil;
pub mod manifest;
pub mod plot;

pub use fsutil::{write_atomic, write_json_atomic};
