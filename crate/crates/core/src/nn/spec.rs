use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::cifar::{CHANNELS, HEIGHT, WIDTH};
use crate::error::{Error, Result};

use super::ops::Geometry;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum LayerKind {
    Conv,
    ConvTranspose,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    /// Extra rows/columns on the output of a transposed convolution.
    pub output_padding: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub const fn conv(in_channels: usize, out_channels: usize, activation: Activation) -> Self {
        LayerSpec {
            kind: LayerKind::Conv,
            in_channels,
            out_channels,
            kernel: 3,
            stride: 2,
            padding: 1,
            output_padding: 0,
            activation,
        }
    }

    pub const fn conv_transpose(in_channels: usize, out_channels: usize, activation: Activation) -> Self {
        LayerSpec {
            kind: LayerKind::ConvTranspose,
            in_channels,
            out_channels,
            kernel: 3,
            stride: 2,
            padding: 1,
            output_padding: 1,
            activation,
        }
    }

    /// Spatial output size for an `h x w` input.
    pub fn output_hw(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        if self.kernel == 0 || self.stride == 0 {
            return Err(Error::SpecInvariant("kernel and stride must be >= 1".into()));
        }
        let dim = |x: usize| -> Result<usize> {
            match self.kind {
                LayerKind::Conv => {
                    if self.output_padding != 0 {
                        return Err(Error::SpecInvariant("output_padding only applies to transposed convolutions".into()));
                    }
                    let padded = x + 2 * self.padding;
                    if padded < self.kernel {
                        return Err(Error::SpecInvariant(format!("kernel {} larger than padded input {padded}", self.kernel)));
                    }
                    Ok((padded - self.kernel) / self.stride + 1)
                }
                LayerKind::ConvTranspose => {
                    if self.output_padding >= self.stride {
                        return Err(Error::SpecInvariant("output_padding must be smaller than stride".into()));
                    }
                    let full = (x.saturating_sub(1)) * self.stride + self.kernel + self.output_padding;
                    if x == 0 || full <= 2 * self.padding {
                        return Err(Error::SpecInvariant("transposed convolution output would be empty".into()));
                    }
                    Ok(full - 2 * self.padding)
                }
            }
        };
        Ok((dim(h)?, dim(w)?))
    }

    /// Weight tensor shape in the conventional layout.
    pub fn weight_shape(&self) -> [usize; 4] {
        let k = self.kernel;
        match self.kind {
            LayerKind::Conv => [self.out_channels, self.in_channels, k, k],
            LayerKind::ConvTranspose => [self.in_channels, self.out_channels, k, k],
        }
    }

    pub fn fan_in(&self) -> usize {
        self.in_channels * self.kernel * self.kernel
    }

    pub fn param_count(&self) -> usize {
        self.weight_shape().iter().product::<usize>() + self.out_channels
    }

    /// Kernel geometry for an input of `h x w`.
    pub(crate) fn geometry(&self, h: usize, w: usize) -> Result<(Geometry, usize, usize)> {
        let (oh, ow) = self.output_hw(h, w)?;
        let g = match self.kind {
            LayerKind::Conv => Geometry {
                channels: self.in_channels,
                in_h: h,
                in_w: w,
                out_h: oh,
                out_w: ow,
                kernel: self.kernel,
                stride: self.stride,
                padding: self.padding,
            },
            LayerKind::ConvTranspose => Geometry {
                channels: self.out_channels,
                in_h: oh,
                in_w: ow,
                out_h: h,
                out_w: w,
                kernel: self.kernel,
                stride: self.stride,
                padding: self.padding,
            },
        };
        Ok((g, oh, ow))
    }
}

/// Encoder/decoder layer stacks and the latent shape they meet at.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AutoencoderSpec {
    pub encoder_layers: Vec<LayerSpec>,
    pub decoder_layers: Vec<LayerSpec>,
    /// `[channels, height, width]`.
    pub latent_shape: [usize; 3],
}

/// Image shape the codec consumes and produces.
pub const IMAGE_SHAPE: [usize; 3] = [CHANNELS, HEIGHT, WIDTH];

/// Three stride-2 convolutions down to 128x4x4 and their transposed mirror,
/// ending in tanh.
pub fn default_spec() -> AutoencoderSpec {
    use Activation::*;
    AutoencoderSpec {
        encoder_layers: vec![
            LayerSpec::conv(3, 32, Relu),
            LayerSpec::conv(32, 64, Relu),
            LayerSpec::conv(64, 128, Relu),
        ],
        decoder_layers: vec![
            LayerSpec::conv_transpose(128, 64, Relu),
            LayerSpec::conv_transpose(64, 32, Relu),
            LayerSpec::conv_transpose(32, 3, Tanh),
        ],
        latent_shape: [128, 4, 4],
    }
}

fn propagate(layers: &[LayerSpec], kind: LayerKind, start: [usize; 3], stage: &str) -> Result<[usize; 3]> {
    let [mut c, mut h, mut w] = start;
    for (i, layer) in layers.iter().enumerate() {
        if layer.kind != kind {
            return Err(Error::SpecInvariant(format!("{stage} layer {i} has kind {:?}, expected {kind:?}", layer.kind)));
        }
        if layer.in_channels != c {
            return Err(Error::SpecInvariant(format!(
                "{stage} layer {i} expects {} channels, receives {c}",
                layer.in_channels
            )));
        }
        (h, w) = layer.output_hw(h, w)?;
        c = layer.out_channels;
    }
    Ok([c, h, w])
}

impl AutoencoderSpec {
    /// Check the shape contract: the encoder maps 3x32x32 to the latent
    /// shape, the decoder maps it back, and the output is tanh-bounded.
    pub fn validate(&self) -> Result<()> {
        if self.encoder_layers.is_empty() || self.decoder_layers.is_empty() {
            return Err(Error::SpecInvariant("encoder and decoder need at least one layer".into()));
        }
        let latent = propagate(&self.encoder_layers, LayerKind::Conv, IMAGE_SHAPE, "encoder")?;
        if latent != self.latent_shape {
            return Err(Error::SpecInvariant(format!(
                "encoder produces {latent:?}, latent_shape is {:?}",
                self.latent_shape
            )));
        }
        let out = propagate(&self.decoder_layers, LayerKind::ConvTranspose, latent, "decoder")?;
        if out != IMAGE_SHAPE {
            return Err(Error::SpecInvariant(format!("decoder produces {out:?}, expected {IMAGE_SHAPE:?}")));
        }
        if self.decoder_layers.last().map(|l| l.activation) != Some(Activation::Tanh) {
            return Err(Error::SpecInvariant("final decoder activation must be tanh".into()));
        }
        Ok(())
    }

    pub fn latent_len(&self) -> usize {
        self.latent_shape.iter().product()
    }

    /// All layers, encoder first.
    pub fn layers(&self) -> impl Iterator<Item = &LayerSpec> {
        self.encoder_layers.iter().chain(&self.decoder_layers)
    }

    pub fn num_layers(&self) -> usize {
        self.encoder_layers.len() + self.decoder_layers.len()
    }

    /// Trainable scalars in the codec (no classifier head).
    pub fn param_count(&self) -> usize {
        self.layers().map(LayerSpec::param_count).sum()
    }
}
