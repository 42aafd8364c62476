//! Forward and backward passes of the codec and its classifier head.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::cifar::{ImageBatch, CHANNELS, HEIGHT, IMAGE_LEN, NUM_CLASSES, WIDTH};
use crate::error::{Error, Result};
use crate::loss::{cross_entropy_with_grad, mse_with_grad};
use crate::real::{gemm, MatRef, Real};

use super::ops::{
    conv_backward, conv_forward, conv_transpose_backward, conv_transpose_forward, nchw_to_nhwc,
    nhwc_to_nchw,
};
use super::params::Parameters;
use super::spec::{Activation, LayerKind, LayerSpec};

/// A batch of latent codes, `len x c x h x w` in planar layout.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentCode<T> {
    pub data: Vec<T>,
    pub shape: [usize; 3],
}

impl<T> LatentCode<T> {
    pub fn len(&self) -> usize {
        let per: usize = self.shape.iter().product();
        self.data.len().checked_div(per).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

// The negated comparisons send NaN to zero.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
fn activate<T: Real>(act: Activation, v: &mut [T]) {
    match act {
        Activation::Identity => {}
        Activation::Relu => {
            for x in v {
                if !(*x > T::ZERO) {
                    *x = T::ZERO;
                }
            }
        }
        Activation::Tanh => {
            for x in v {
                *x = x.tanh();
            }
        }
    }
}

/// Multiply `grad` by the activation derivative, expressed through the
/// activation's output `y`.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
fn activation_backward<T: Real>(act: Activation, y: &[T], grad: &mut [T]) {
    match act {
        Activation::Identity => {}
        Activation::Relu => {
            for (g, &o) in grad.iter_mut().zip(y) {
                if !(o > T::ZERO) {
                    *g = T::ZERO;
                }
            }
        }
        Activation::Tanh => {
            for (g, &o) in grad.iter_mut().zip(y) {
                *g *= T::ONE - o * o;
            }
        }
    }
}

/// Apply one layer to an NHWC tensor, returning the activated output and
/// its spatial size. `cols` receives the patch matrix of convolutions.
fn apply_layer<T: Real>(
    layer: &LayerSpec,
    weight: &[T],
    bias: &[T],
    x: &[T],
    n: usize,
    (h, w): (usize, usize),
    cols: &mut Vec<T>,
) -> Result<(Vec<T>, (usize, usize))> {
    let (g, oh, ow) = layer.geometry(h, w)?;
    let mut y = match layer.kind {
        LayerKind::Conv => conv_forward(x, n, &g, weight, bias, cols),
        LayerKind::ConvTranspose => conv_transpose_forward(x, n, layer.in_channels, &g, weight, bias),
    };
    activate(layer.activation, &mut y);
    Ok((y, (oh, ow)))
}

/// Run layers `range` over an NHWC tensor without keeping intermediates.
fn run_layers<T: Real>(
    params: &Parameters<T>,
    range: core::ops::Range<usize>,
    mut x: Vec<T>,
    n: usize,
    mut hw: (usize, usize),
) -> Result<(Vec<T>, (usize, usize))> {
    let layers: Vec<&LayerSpec> = params.spec().layers().collect();
    let mut cols = Vec::new();
    for i in range {
        let (y, next) = apply_layer(layers[i], params.weight(i), params.bias(i), &x, n, hw, &mut cols)?;
        x = y;
        hw = next;
    }
    Ok((x, hw))
}

fn check_images<T>(data: &[T]) -> Result<usize> {
    if data.is_empty() || !data.len().is_multiple_of(IMAGE_LEN) {
        return Err(Error::ShapeMismatch {
            what: "image batch",
            expected: format!("n x {CHANNELS} x {HEIGHT} x {WIDTH}"),
            actual: format!("{} values", data.len()),
        });
    }
    Ok(data.len() / IMAGE_LEN)
}

fn check_latent<T: Real>(params: &Parameters<T>, data: &[T]) -> Result<usize> {
    let per = params.spec().latent_len();
    if data.is_empty() || !data.len().is_multiple_of(per) {
        return Err(Error::ShapeMismatch {
            what: "latent code",
            expected: format!("n x {:?}", params.spec().latent_shape),
            actual: format!("{} values", data.len()),
        });
    }
    Ok(data.len() / per)
}

/// Anything that maps planar image batches to latent codes and back.
pub trait Codec<T: Real> {
    /// Scalars per latent code.
    fn latent_len(&self) -> usize;
    fn encode_planar(&self, images: &[T]) -> Result<Vec<T>>;
    fn decode_planar(&self, codes: &[T]) -> Result<Vec<T>>;

    fn reconstruct_planar(&self, images: &[T]) -> Result<Vec<T>> {
        let z = self.encode_planar(images)?;
        self.decode_planar(&z)
    }
}

impl<T: Real> Codec<T> for Parameters<T> {
    fn latent_len(&self) -> usize {
        self.spec().latent_len()
    }

    fn encode_planar(&self, images: &[T]) -> Result<Vec<T>> {
        let n = check_images(images)?;
        let [lc, lh, lw] = self.spec().latent_shape;
        let x = nchw_to_nhwc(images, n, CHANNELS, HEIGHT * WIDTH);
        let (z, _) = run_layers(self, 0..self.spec().encoder_layers.len(), x, n, (HEIGHT, WIDTH))?;
        Ok(nhwc_to_nchw(&z, n, lc, lh * lw))
    }

    fn decode_planar(&self, codes: &[T]) -> Result<Vec<T>> {
        let n = check_latent(self, codes)?;
        let [lc, lh, lw] = self.spec().latent_shape;
        let z = nchw_to_nhwc(codes, n, lc, lh * lw);
        let e = self.spec().encoder_layers.len();
        let (y, _) = run_layers(self, e..self.spec().num_layers(), z, n, (lh, lw))?;
        Ok(nhwc_to_nchw(&y, n, CHANNELS, HEIGHT * WIDTH))
    }

    fn reconstruct_planar(&self, images: &[T]) -> Result<Vec<T>> {
        let n = check_images(images)?;
        let x = nchw_to_nhwc(images, n, CHANNELS, HEIGHT * WIDTH);
        let (y, _) = run_layers(self, 0..self.spec().num_layers(), x, n, (HEIGHT, WIDTH))?;
        Ok(nhwc_to_nchw(&y, n, CHANNELS, HEIGHT * WIDTH))
    }
}

pub fn encode<T: Real>(params: &Parameters<T>, batch: &ImageBatch<T>) -> Result<LatentCode<T>> {
    Ok(LatentCode { data: params.encode_planar(&batch.data)?, shape: params.spec().latent_shape })
}

/// Decoder output is tanh-bounded to `[-1, 1]`.
pub fn decode<T: Real>(params: &Parameters<T>, code: &LatentCode<T>) -> Result<ImageBatch<T>> {
    if code.shape != params.spec().latent_shape {
        return Err(Error::ShapeMismatch {
            what: "latent code",
            expected: format!("{:?}", params.spec().latent_shape),
            actual: format!("{:?}", code.shape),
        });
    }
    ImageBatch::new(params.decode_planar(&code.data)?, None)
}

pub fn forward<T: Real>(params: &Parameters<T>, batch: &ImageBatch<T>) -> Result<ImageBatch<T>> {
    ImageBatch::new(params.reconstruct_planar(&batch.data)?, None)
}

/// Classifier logits (`len x 10`) for latent codes; requires a head.
pub fn classify<T: Real>(params: &Parameters<T>, code: &LatentCode<T>) -> Result<Vec<T>> {
    let (w, b) = params
        .head()
        .ok_or_else(|| Error::InvalidConfig("parameters have no classifier head".into()))?;
    let n = check_latent(params, &code.data)?;
    Ok(head_forward(w, b, &code.data, n, params.spec().latent_len()))
}

fn head_forward<T: Real>(w: &[T], b: &[T], flat: &[T], n: usize, dim: usize) -> Vec<T> {
    let mut logits = vec![T::ZERO; n * NUM_CLASSES];
    gemm(T::ONE, MatRef::new(flat, n, dim), MatRef::new(w, NUM_CLASSES, dim).t(), T::ZERO, &mut logits);
    for row in logits.chunks_exact_mut(NUM_CLASSES) {
        for (v, &bb) in row.iter_mut().zip(b) {
            *v += bb;
        }
    }
    logits
}

fn layer_input<'a, T>(
    i: usize,
    n_enc: usize,
    x0: &'a [T],
    outputs: &'a [Vec<T>],
    noisy_latent: &'a Option<Vec<T>>,
) -> &'a [T] {
    match (i, noisy_latent) {
        (0, _) => x0,
        (i, Some(z)) if i == n_enc => z,
        (i, _) => &outputs[i - 1],
    }
}

/// Loss components of one optimization step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepLoss {
    pub reconstruction: f64,
    pub classification: Option<f64>,
    /// `reconstruction + aux_weight * classification`.
    pub total: f64,
}

/// One training example batch as seen by [`loss_and_grad`].
pub struct StepInput<'a, T> {
    /// Planar encoder input (already corrupted for input-placement noise).
    pub input: &'a [T],
    /// Planar clean reconstruction target.
    pub target: &'a [T],
    /// Class labels; enables the classifier term when the parameters have a head.
    pub labels: Option<&'a [u8]>,
    /// Weight of the cross-entropy term.
    pub aux_weight: f64,
}

/// Training loss and gradients for every parameter tensor.
///
/// In-place edit of a batch of latent codes, used to inject channel noise.
pub type LatentHook<'a, T> = Option<&'a mut dyn FnMut(&mut [T])>;

/// `latent_noise` is applied to the (interleaved) latent code between
/// encoder and decoder; the classifier head sees the clean code.
pub fn loss_and_grad<T: Real>(
    params: &Parameters<T>,
    step: &StepInput<'_, T>,
    latent_noise: LatentHook<'_, T>,
) -> Result<(StepLoss, Vec<Vec<T>>)> {
    let n = check_images(step.input)?;
    if step.target.len() != step.input.len() {
        return Err(Error::ShapeMismatch {
            what: "reconstruction target",
            expected: format!("{}", step.input.len()),
            actual: format!("{}", step.target.len()),
        });
    }
    let spec = params.spec();
    let layers: Vec<&LayerSpec> = spec.layers().collect();
    let n_layers = layers.len();
    let n_enc = spec.encoder_layers.len();

    // forward, keeping every layer's output and patch matrix
    let mut outputs: Vec<Vec<T>> = Vec::with_capacity(n_layers);
    let mut cols: Vec<Vec<T>> = Vec::with_capacity(n_layers);
    let mut hws = Vec::with_capacity(n_layers);
    let x0 = nchw_to_nhwc(step.input, n, CHANNELS, HEIGHT * WIDTH);
    let mut noisy_latent: Option<Vec<T>> = None;
    let mut latent_noise = latent_noise;
    let mut hw = (HEIGHT, WIDTH);
    for (i, &layer) in layers.iter().enumerate() {
        let x = layer_input(i, n_enc, &x0, &outputs, &noisy_latent);
        let mut c = Vec::new();
        let (y, next) = apply_layer(layer, params.weight(i), params.bias(i), x, n, hw, &mut c)?;
        if i + 1 == n_enc {
            if let Some(f) = latent_noise.as_mut() {
                let mut z = y.clone();
                f(&mut z);
                noisy_latent = Some(z);
            }
        }
        hws.push(hw);
        outputs.push(y);
        cols.push(c);
        hw = next;
    }

    let target = nchw_to_nhwc(step.target, n, CHANNELS, HEIGHT * WIDTH);
    let (recon_loss, mut d) = mse_with_grad(&outputs[n_layers - 1], &target)?;

    if params.has_head() && step.aux_weight > 0.0 && step.labels.is_none() {
        return Err(Error::MissingLabels);
    }
    let mut grads = params.zeros_like();
    let mut classification = None;
    let mut latent_grad: Option<Vec<T>> = None;
    if let (Some((hw_w, hw_b)), Some(labels)) = (params.head(), step.labels) {
        if labels.len() != n {
            return Err(Error::ShapeMismatch {
                what: "labels",
                expected: format!("{n}"),
                actual: format!("{}", labels.len()),
            });
        }
        let [lc, lh, lw] = spec.latent_shape;
        let dim = spec.latent_len();
        let flat = nhwc_to_nchw(&outputs[n_enc - 1], n, lc, lh * lw);
        let logits = head_forward(hw_w, hw_b, &flat, n, dim);
        let (ce, mut dlogits) = cross_entropy_with_grad(&logits, labels)?;
        let lambda = T::from_f64(step.aux_weight);
        for g in &mut dlogits {
            *g *= lambda;
        }
        let nt = grads.len();
        gemm(
            T::ONE,
            MatRef::new(&dlogits, n, NUM_CLASSES).t(),
            MatRef::new(&flat, n, dim),
            T::ZERO,
            &mut grads[nt - 2],
        );
        let db = &mut grads[nt - 1];
        for row in dlogits.chunks_exact(NUM_CLASSES) {
            for (d, &v) in db.iter_mut().zip(row) {
                *d += v;
            }
        }
        let mut dflat = vec![T::ZERO; n * dim];
        gemm(T::ONE, MatRef::new(&dlogits, n, NUM_CLASSES), MatRef::new(hw_w, NUM_CLASSES, dim), T::ZERO, &mut dflat);
        latent_grad = Some(nchw_to_nhwc(&dflat, n, lc, lh * lw));
        classification = Some(ce);
    }

    // backward through the layer stack
    for i in (0..n_layers).rev() {
        let layer = layers[i];
        activation_backward(layer.activation, &outputs[i], &mut d);
        let (g, _, _) = layer.geometry(hws[i].0, hws[i].1)?;
        let (gw, rest) = grads[2 * i..].split_at_mut(1);
        let (dw, db) = (&mut gw[0], &mut rest[0]);
        let need_dx = i > 0;
        let dx = match layer.kind {
            LayerKind::Conv => conv_backward(&d, n, &g, params.weight(i), &cols[i], dw, db, need_dx),
            LayerKind::ConvTranspose => conv_transpose_backward(
                &d,
                layer_input(i, n_enc, &x0, &outputs, &noisy_latent),
                n,
                layer.in_channels,
                &g,
                params.weight(i),
                dw,
                db,
                need_dx,
            ),
        };
        if let Some(mut dx) = dx {
            if i == n_enc {
                if let Some(lg) = latent_grad.take() {
                    for (a, b) in dx.iter_mut().zip(lg) {
                        *a += b;
                    }
                }
            }
            d = dx;
        }
    }

    let total = recon_loss + classification.map_or(0.0, |c| step.aux_weight * c);
    Ok((StepLoss { reconstruction: recon_loss, classification, total }, grads))
}
